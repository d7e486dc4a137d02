"""State extensions and the discord-over-extension quantifiers.

An extension of ``rho_ab`` is produced by purifying ``rho_ab`` onto an
environment of dimension ``rank`` and applying an isometry from that
environment into ``a' (x) [b'] (x) F``; discarding ``F`` gives
``rho_{aa'b}`` (or ``rho_{aa'bb'}``). This reaches every extension with the
chosen ancilla dimensions.

Quantities (``side='left'`` / ``'both'``):

``gdse``       min over extensions and CQ / CC states of ``d(rho_ext, sigma)``
``midse``      min over extensions and local pinchings of ``d(rho_ext, P(rho_ext))``
``pt_gdse``    min over CQ / CC states on the extended space of ``d(rho, tr' sigma)``
``pt_midse``   min over extensions and pinchings of ``d(rho, tr' P(rho_ext))``
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels, linalg
from .errors import BadIsometry, BadParameter, LayoutMismatch
from .measures import Side, as_side, purification_factor
from .optimize import (
    MeasureReport,
    OptimizerConfig,
    Problem,
    _check_distance,
    _normalized_state,
    closest_separable,
    run_multistart,
    state_factor,
    stream_salt,
)
from .parametrize import ComplexBlock, IsometryBlock, ParamSpace, UnitaryBlock
from .states import DensityMatrix, SubsystemLayout, _check_distribution

ISOMETRY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ExtensionParams:
    """Ancilla dims (``(d_a',)`` or ``(d_a', d_b')``) and the channel isometry."""

    ancilla: tuple[int, ...]
    isometry: np.ndarray

    def __post_init__(self):
        anc = tuple(int(d) for d in self.ancilla)
        object.__setattr__(self, "ancilla", anc)
        if len(anc) not in (1, 2) or min(anc) < 1:
            raise BadParameter("ancilla dims must be one or two positive integers")
        v = np.asarray(self.isometry, dtype=complex)
        object.__setattr__(self, "isometry", v)
        if v.ndim != 2 or v.shape[0] % int(np.prod(anc)) != 0:
            raise BadIsometry("isometry rows must be a multiple of the ancilla dimension")
        if np.linalg.norm(v.conj().T @ v - np.eye(v.shape[1])) > ISOMETRY_TOL:
            raise BadIsometry("channel matrix is not an isometry")

    @property
    def disposal_dim(self) -> int:
        return self.isometry.shape[0] // int(np.prod(self.ancilla))


def disposal_dim(rank: int, ancilla: Sequence[int], da: int, db: int) -> int:
    """Environment size that makes the dilation complete for the given ancilla."""
    anc = int(np.prod(ancilla))
    return min(rank * anc, da * db * anc)


def extension_layout(da: int, db: int, ancilla: Sequence[int]) -> SubsystemLayout:
    if len(ancilla) == 1:
        return SubsystemLayout((("a", da), ("a'", ancilla[0]), ("b", db)))
    return SubsystemLayout((("a", da), ("a'", ancilla[0]), ("b", db), ("b'", ancilla[1])))


def uncorrelated_params(rank: int, ancilla: Sequence[int], dim_f: int | None = None) -> ExtensionParams:
    """Channel sending every environment state to ``|0>`` on the ancilla: ``rho (x) |0><0|``."""
    anc = tuple(ancilla)
    dim_f = rank if dim_f is None else dim_f
    v = np.zeros((int(np.prod(anc)) * dim_f, rank), dtype=complex)
    v[np.arange(rank), np.arange(rank)] = 1.0
    return ExtensionParams(anc, v)


def identity_params(rank: int) -> ExtensionParams:
    """Ancilla of dimension ``rank`` receiving the environment unchanged (the purification)."""
    return ExtensionParams((rank,), np.eye(rank, dtype=complex))


def _bipartite(rho: DensityMatrix) -> tuple[np.ndarray, int, int]:
    if len(rho.dims) != 2:
        raise LayoutMismatch("extensions are defined for two-party layouts")
    return rho.mat, rho.dims[0], rho.dims[1]


def extend(rho: DensityMatrix, params: ExtensionParams) -> DensityMatrix:
    mat, da, db = _bipartite(rho)
    psi0 = purification_factor(mat, da, db)
    if params.isometry.shape[1] != psi0.shape[2]:
        raise BadIsometry(f"isometry has {params.isometry.shape[1]} columns, state rank is {psi0.shape[2]}")
    a = kernels.extension_factor(psi0, params.isometry, params.ancilla)
    return DensityMatrix.from_array(a @ a.conj().T, extension_layout(da, db, params.ancilla))


def flag_extension(extensions: Sequence[DensityMatrix], weights) -> DensityMatrix:
    """``sum_i p_i rho^i_{aa'b} (x) |i><i|_{a''}``, with the flag placed right after ``a'``."""
    w = np.asarray(weights, dtype=float)
    _check_distribution(w)
    if len(extensions) != w.size:
        raise LayoutMismatch("one weight per extension is required")
    layout = extensions[0].layout
    if any(e.layout != layout for e in extensions):
        raise LayoutMismatch("extensions must share one layout")
    k = w.size
    pos = layout.index("a'") + 1 if "a'" in layout.labels else 1
    parts = list(layout.parts)
    parts.insert(pos, ("a''", k))
    new_layout = SubsystemLayout(tuple(parts))
    dims = list(layout.dims)
    total = np.zeros((new_layout.total,) * 2, dtype=complex)
    for i, (p, e) in enumerate(zip(w, extensions)):
        flag = np.zeros((k, k))
        flag[i, i] = 1.0
        m = np.kron(e.mat, flag)
        # kron puts the flag last; move it to position ``pos``
        n = len(dims)
        perm = list(range(pos)) + [n] + list(range(pos, n))
        total += p * linalg.permute_subsystems(m, dims + [k], perm)
    return DensityMatrix.from_array(total, new_layout)


def pad_ancilla(ext: DensityMatrix, dim: int, label: str = "a'") -> DensityMatrix:
    """Embed ancilla ``label`` into a ``dim``-dimensional space through its first basis vectors."""
    i = ext.layout.index(label)
    old = ext.dims[i]
    if dim < old:
        raise BadParameter(f"cannot shrink ancilla {label} from {old} to {dim}")
    ops = [np.eye(d) for d in ext.dims]
    ops[i] = np.eye(dim, old)
    j = linalg.tensor(*ops)
    parts = list(ext.layout.parts)
    parts[i] = (label, dim)
    return DensityMatrix.from_array(j @ ext.mat @ j.conj().T, SubsystemLayout(tuple(parts)))


# problem construction ------------------------------------------------------


class ExtensionSetup:
    """Shapes shared by every extension search on one input state and ancilla choice."""

    def __init__(self, rho: DensityMatrix, ancilla: Sequence[int]):
        self.rho = rho
        self.mat, self.da, self.db = _bipartite(rho)
        self.psi0 = purification_factor(self.mat, self.da, self.db)
        self.rank = self.psi0.shape[2]
        self.ancilla = tuple(int(x) for x in ancilla)
        self.two_sided = len(self.ancilla) == 2
        self.dim_f = disposal_dim(self.rank, self.ancilla, self.da, self.db)
        self.dl = self.da * self.ancilla[0]
        self.dr = self.db * (self.ancilla[1] if self.two_sided else 1)
        self.ext_dims = ([self.da, self.ancilla[0], self.db] +
                         ([self.ancilla[1]] if self.two_sided else []))
        self.traced = [1, 3] if self.two_sided else [1]
        self.layout = extension_layout(self.da, self.db, self.ancilla)

    def isometry_block(self):
        return IsometryBlock(int(np.prod(self.ancilla)) * self.dim_f, self.rank)

    def ext_factor(self, v):
        return kernels.extension_factor(self.psi0, v, self.ancilla)

    def ext_pullback(self, g):
        return kernels.extension_pullback(self.psi0, self.ancilla, g)


def _classicalizer_blocks(setup: ExtensionSetup, side: Side, with_weights: bool) -> dict:
    if side is Side.LEFT:
        blocks = {"ua": UnitaryBlock(setup.dl)}
        if with_weights:
            blocks["b"] = ComplexBlock((setup.dl, setup.dr, setup.dr))
    else:
        blocks = {"ua": UnitaryBlock(setup.dl), "ub": UnitaryBlock(setup.dr)}
        if with_weights:
            blocks["c"] = ComplexBlock((setup.dl * setup.dr,))
    return blocks


def _target_factor(vals, side: Side):
    """CQ / CC factor on the extended space from classicalizer values, plus its pullback."""
    if side is Side.LEFT:
        u, b = vals["ua"], vals["b"]
        w = kernels.cq_factor(u, b)

        def back(g):
            gu, gb = kernels.cq_pullback(u, b, g)
            return {"ua": gu, "b": gb}
    else:
        k = np.kron(vals["ua"], vals["ub"])
        w = kernels.scaled_columns(k, vals["c"])

        def back(g):
            gk, gc = kernels.scaled_columns_pullback(k, vals["c"], g)
            gua, gub = kernels.kron_pullback(vals["ua"], vals["ub"], gk)
            return {"ua": gua, "ub": gub, "c": gc}
    return w, back


def _pinching_basis(vals, side: Side, setup: ExtensionSetup):
    """Basis and block size for the local pinching, plus the pullback to block values."""
    if side is Side.LEFT:
        return vals["ua"], setup.dl, (lambda g: {"ua": g})
    k = np.kron(vals["ua"], vals["ub"])

    def back(g):
        gua, gub = kernels.kron_pullback(vals["ua"], vals["ub"], g)
        return {"ua": gua, "ub": gub}

    return k, setup.dl * setup.dr, back


def _merge(*ds):
    out = {}
    for d in ds:
        for k, v in d.items():
            out[k] = out[k] + v if k in out else v
    return out


def build_problem(setup: ExtensionSetup, kind: str, distance: str, side: Side) -> Problem:
    if kind == "gdse":
        space = ParamSpace({"v": setup.isometry_block(), **_classicalizer_blocks(setup, side, True)})

        def fun(vals):
            a = setup.ext_factor(vals["v"])
            w, back = _target_factor(vals, side)
            val, ga, gw = kernels.distance_factors(distance, a, w)
            if ga is None:
                return val, {}
            return val, {"v": setup.ext_pullback(ga), **back(gw)}

    elif kind == "midse":
        space = ParamSpace({"v": setup.isometry_block(), **_classicalizer_blocks(setup, side, False)})

        def fun(vals):
            a = setup.ext_factor(vals["v"])
            u, dcl, back = _pinching_basis(vals, side, setup)
            if distance == "relent":
                s_rho, g_rho = kernels.entropy_factor(a)
                s_pin, k, gu = kernels.pinched_entropy(a @ a.conj().T, u, dcl)
                ga = 2.0 * k @ a - g_rho
                return s_pin - s_rho, {"v": setup.ext_pullback(ga), **back(gu)}
            w = kernels.pinch_factor(a, u, dcl)
            val, ga, gw = kernels.bures_factors(a, w)
            ga2, gu = kernels.pinch_pullback(a, u, dcl, gw)
            return val, {"v": setup.ext_pullback(ga + ga2), **back(gu)}

    elif kind == "pt_midse":
        space = ParamSpace({"v": setup.isometry_block(), **_classicalizer_blocks(setup, side, False)})
        target = state_factor(setup.mat)

        def fun(vals):
            a = setup.ext_factor(vals["v"])
            u, dcl, back = _pinching_basis(vals, side, setup)
            w = kernels.pinch_factor(a, u, dcl)
            wt = kernels.ptrace_factor(w, setup.ext_dims, setup.traced)
            val, _, gwt = kernels.distance_factors(distance, target, wt, want_a=False)
            if gwt is None:
                return val, {}
            gw = kernels.ptrace_pullback(setup.ext_dims, setup.traced, w.shape[1], gwt)
            ga, gu = kernels.pinch_pullback(a, u, dcl, gw)
            return val, {"v": setup.ext_pullback(ga), **back(gu)}

    elif kind == "pt_gdse":
        space = ParamSpace(_classicalizer_blocks(setup, side, True))
        target = state_factor(setup.mat)

        def fun(vals):
            w, back = _target_factor(vals, side)
            wt = kernels.ptrace_factor(w, setup.ext_dims, setup.traced)
            val, _, gwt = kernels.distance_factors(distance, target, wt, want_a=False)
            if gwt is None:
                return val, {}
            return val, back(kernels.ptrace_pullback(setup.ext_dims, setup.traced, w.shape[1], gwt))

    else:
        raise BadParameter(f"unknown extension quantity {kind!r}")
    return Problem(space, fun, 0.0)


# warm starts across ancilla sizes -------------------------------------------


def _embed_basis(u: np.ndarray, old_dims: Sequence[int], new_dims: Sequence[int]) -> np.ndarray:
    """Zero-pad basis vectors on a tensor space and complete them to a unitary."""
    n_old = u.shape[1]
    t = u.reshape(list(old_dims) + [n_old])
    pad = [(0, n - o) for o, n in zip(old_dims, new_dims)] + [(0, 0)]
    cols = np.pad(t, pad).reshape(int(np.prod(new_dims)), n_old)
    return linalg.complete_basis(cols)


def _embed_values(vals: dict, old: ExtensionSetup, new: ExtensionSetup, kind: str, side: Side) -> dict:
    out = {}
    if "v" in vals:
        v = vals["v"]
        old_shape = list(old.ancilla) + [old.dim_f, old.rank]
        new_shape = list(new.ancilla) + [new.dim_f, new.rank]
        t = v.reshape(old_shape)
        t = np.pad(t, [(0, n - o) for o, n in zip(old_shape, new_shape)])
        out["v"] = t.reshape(-1, new.rank)
    out["ua"] = _embed_basis(vals["ua"], [old.da, old.ancilla[0]], [new.da, new.ancilla[0]])
    if side is Side.BOTH:
        ob = [old.db] + ([old.ancilla[1]] if old.two_sided else [1])
        nb = [new.db] + ([new.ancilla[1]] if new.two_sided else [1])
        out["ub"] = _embed_basis(vals["ub"], ob, nb)
        if "c" in vals:
            c = vals["c"].reshape(old.dl, old.dr)
            out["c"] = np.pad(c, [(0, new.dl - old.dl), (0, new.dr - old.dr)]).reshape(-1)
    elif "b" in vals:
        b = vals["b"]
        out["b"] = np.pad(b, [(0, new.dl - old.dl), (0, new.dr - old.dr), (0, new.dr - old.dr)])
    return out


PLATEAU_TOL = 1e-6


def schedule_plateau(values, value_tol: float) -> bool:
    """True when the last ancilla enlargement improved the value by at most ``PLATEAU_TOL``."""
    if len(values) < 2:
        return True
    return values[-2] - values[-1] <= max(PLATEAU_TOL, 2 * value_tol)


def default_schedule(da: int, db: int, side: Side) -> tuple:
    if side is Side.LEFT:
        return (1, da, da * db)
    return ((1, 1), (da, db))


def _normalize_schedule(schedule, side: Side) -> list[tuple[int, ...]]:
    out = []
    for item in schedule:
        t = tuple(item) if isinstance(item, (tuple, list)) else (int(item),)
        if side is Side.BOTH and len(t) == 1:
            t = (t[0], t[0])
        if side is Side.LEFT and len(t) != 1:
            raise BadParameter("one-sided extensions take a single ancilla dimension per schedule entry")
        out.append(tuple(int(x) for x in t))
    for a, b in zip(out, out[1:]):
        if any(y < x for x, y in zip(a, b)):
            raise BadParameter("ancilla schedule must be non-decreasing")
    return out


def _certificate(setup: ExtensionSetup, kind: str, side: Side, vals: dict) -> dict:
    cert = {"ancilla": setup.ancilla}
    if "v" in vals:
        a = setup.ext_factor(vals["v"])
        cert["extension"] = DensityMatrix.from_array(a @ a.conj().T, setup.layout)
        cert["isometry"] = vals["v"]
    if kind in ("gdse", "pt_gdse"):
        w, _ = _target_factor(vals, side)
    else:
        u, dcl, _ = _pinching_basis(vals, side, setup)
        w = kernels.pinch_factor(setup.ext_factor(vals["v"]), u, dcl)
    cert["classical_state"] = DensityMatrix.from_array(_normalized_state(w), setup.layout)
    if kind.startswith("pt_"):
        wt = kernels.ptrace_factor(w, setup.ext_dims, setup.traced)
        cert["reduced_state"] = DensityMatrix.from_array(_normalized_state(wt), setup.rho.layout)
    cert["basis_left"] = vals["ua"]
    if side is Side.BOTH:
        cert["basis_right"] = vals["ub"]
    return cert


def extension_search(rho: DensityMatrix, kind: str, distance: str = "bures", side=Side.LEFT,
                     config: OptimizerConfig | None = None, schedule=None) -> MeasureReport:
    """Run one extension quantity over an ancilla-dimension schedule with warm starts."""
    config = config or OptimizerConfig()
    distance = _check_distance(distance)
    side = as_side(side)
    _, da, db = _bipartite(rho)
    schedule = schedule or config.dims_schedule or default_schedule(da, db, side)
    schedule = _normalize_schedule(schedule, side)
    per_dim, best = [], None
    prev_setup, prev_vals = None, None
    restarts_total = 0
    conv_all = True
    for anc in schedule:
        setup = ExtensionSetup(rho, anc)
        prob = build_problem(setup, kind, distance, side)
        warm = []
        if prev_vals is not None:
            warm.append(prob.space.encode(_embed_values(prev_vals, prev_setup, setup, kind, side)))
        salt = stream_salt(f"ext:{kind}:{distance}:{side.value}:{anc}")
        x, val, diag = run_multistart(prob, config, salt, warm_starts=warm,
                                      groups=[["v"], [k for k in prob.space.blocks if k != "v"]]
                                      if "v" in prob.space.blocks else None)
        vals = prob.space.values(x)
        restarts_total += diag["restarts_used"]
        conv_all = conv_all and diag["success"]
        per_dim.append({"ancilla": list(anc), "value": val, "restarts_used": diag["restarts_used"],
                        "iterations": diag["iterations"]})
        if best is None or val < best[0]:
            best = (val, setup, vals, x, diag)
        prev_setup, prev_vals = setup, vals
        if val <= config.value_tol:
            break
    val, setup, vals, x, diag = best
    values = [d["value"] for d in per_dim]
    plateau = schedule_plateau(values, config.value_tol) or values[-1] <= config.value_tol
    cert = _certificate(setup, kind, side, vals)
    cert["params"] = x
    diagnostics = {"schedule": per_dim, "plateau": bool(plateau), "grad_norm": diag["grad_norm"],
                   "optimizer_success": bool(conv_all)}
    return MeasureReport(value=float(val), certificate=cert, restarts_used=restarts_total,
                         converged=bool(plateau), trace=diag.get("trace"), diagnostics=diagnostics)


def min_discord_over_extensions(rho: DensityMatrix, flavor: str = "bures", side=Side.LEFT,
                                dims_schedule=None, config: OptimizerConfig | None = None) -> MeasureReport:
    """Minimal discord over extensions; the Bures flavor is the Bures discord of the extension."""
    return extension_search(rho, "gdse", flavor, side, config, dims_schedule)


def gdse(rho: DensityMatrix, distance: str = "bures", side=Side.LEFT, config: OptimizerConfig | None = None,
         dims_schedule=None) -> MeasureReport:
    return extension_search(rho, "gdse", distance, side, config, dims_schedule)


def midse(rho: DensityMatrix, distance: str = "bures", side=Side.LEFT, config: OptimizerConfig | None = None,
          dims_schedule=None) -> MeasureReport:
    return extension_search(rho, "midse", distance, side, config, dims_schedule)


def pt_gdse(rho: DensityMatrix, distance: str = "bures", side=Side.LEFT, config: OptimizerConfig | None = None,
            mode: str = "direct", dims_schedule=None) -> MeasureReport:
    """Distance to partial traces of classical states on the extended space.

    ``mode='direct'`` searches the separable set (which those partial traces
    fill); ``mode='extended'`` searches classical states on the extended space.
    """
    if mode == "direct":
        return closest_separable(rho, None, distance, config)
    if mode == "extended":
        return extension_search(rho, "pt_gdse", distance, side, config, dims_schedule)
    raise BadParameter(f"unknown mode {mode!r}")


def pt_midse(rho: DensityMatrix, distance: str = "bures", side=Side.LEFT, config: OptimizerConfig | None = None,
             dims_schedule=None) -> MeasureReport:
    return extension_search(rho, "pt_midse", distance, side, config, dims_schedule)


def extend_with_ancilla(rho: DensityMatrix, ancilla) -> DensityMatrix:
    """``rho (x) ancilla`` with the ancilla on label ``a'`` placed after ``a``."""
    mat, da, db = _bipartite(rho)
    anc = ancilla.mat if isinstance(ancilla, DensityMatrix) else np.asarray(ancilla, dtype=complex)
    k = anc.shape[0]
    m = linalg.permute_subsystems(np.kron(mat, anc), [da, db, k], [0, 2, 1])
    return DensityMatrix.from_array(m, extension_layout(da, db, (k,)))
