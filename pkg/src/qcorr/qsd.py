"""Quantum state discrimination and the fidelity / discrimination correspondence."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg
from .errors import IncompleteBasis, LayoutMismatch, TooManyHypotheses, WrongArity
from .extensions import ExtensionSetup, _embed_basis, _normalize_schedule, default_schedule, schedule_plateau
from .measures import Side, bures_entanglement
from .optimize import (
    MeasureReport,
    OptimizerConfig,
    Problem,
    _local_descent,
    _report,
    restart_rng,
    run_multistart,
    stream_salt,
)
from .parametrize import IsometryBlock, ParamSpace, UnitaryBlock
from .states import DensityMatrix, SubsystemLayout, _check_distribution

ZERO_WEIGHT = 1e-12
SQRT_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class DiscriminationEnsemble:
    priors: np.ndarray
    hypotheses: tuple[DensityMatrix, ...]

    def __post_init__(self):
        p = np.asarray(self.priors, dtype=float)
        _check_distribution(p)
        object.__setattr__(self, "priors", p)
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        if len(self.hypotheses) != p.size:
            raise LayoutMismatch("one prior per hypothesis is required")
        if len({h.dim for h in self.hypotheses}) > 1:
            raise LayoutMismatch("hypotheses must share one dimension")

    @property
    def size(self) -> int:
        return self.priors.size

    @property
    def dim(self) -> int:
        return self.hypotheses[0].dim

    def mixture(self) -> np.ndarray:
        return sum(p * h.mat for p, h in zip(self.priors, self.hypotheses))


def helstrom_two_state(e: DiscriminationEnsemble) -> float:
    """``(1 + ||eta_1 rho_1 - eta_2 rho_2||_1) / 2``."""
    if e.size != 2:
        raise WrongArity(f"the two-state bound needs exactly two hypotheses, got {e.size}")
    diff = e.priors[0] * e.hypotheses[0].mat - e.priors[1] * e.hypotheses[1].mat
    w = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * (1.0 + np.sum(np.abs(w))))


def _grouped_success(weighted: np.ndarray, u: np.ndarray):
    """``sum_k max_i <u_k| T_i |u_k>`` for weighted hypotheses ``T_i = eta_i rho_i``, with gradient."""
    scores = np.real(np.einsum("xk,ixy,yk->ik", u.conj(), weighted, u))
    best = np.argmax(scores, axis=0)
    val = float(np.sum(scores[best, np.arange(u.shape[1])]))
    grad = 2.0 * np.einsum("kxy,yk->xk", weighted[best], u)
    return val, grad, best


def _smoothed_success(weighted: np.ndarray, u: np.ndarray, tau: float):
    """Log-sum-exp relaxation of :func:`_grouped_success` at temperature ``tau``."""
    scores = np.real(np.einsum("xk,ixy,yk->ik", u.conj(), weighted, u))
    top = scores.max(axis=0)
    ex = np.exp((scores - top) / tau)
    tot = ex.sum(axis=0)
    val = float(np.sum(top + tau * np.log(tot)))
    soft = ex / tot
    grad = 2.0 * np.einsum("ik,ixy,yk->xk", soft, weighted, u)
    return val, grad


# temperatures relative to the largest prior; the grouped objective is flat
# wherever one hypothesis wins every projector, the relaxation is not
SMOOTHING_SCHEDULE = (1.0, 0.1, 0.01)


def optimal_success_vn(e: DiscriminationEnsemble, config: OptimizerConfig | None = None) -> MeasureReport:
    """Best success probability over projective measurements.

    A rank-1 orthonormal family from a unitary is grouped into outcomes by
    assigning each projector to the hypothesis that maximizes
    ``eta_i <u_k| rho_i |u_k>``. Each restart first follows a smoothed version
    of that objective down a temperature schedule, then polishes the exact one.
    """
    config = config or OptimizerConfig()
    if e.size > e.dim:
        raise TooManyHypotheses(f"{e.size} hypotheses cannot be separated by projectors in dimension {e.dim}")
    weighted = np.stack([p * h.mat for p, h in zip(e.priors, e.hypotheses)])
    if e.size == 1:
        return MeasureReport(1.0, {"unitary": np.eye(e.dim), "assignment": np.zeros(e.dim, dtype=int)}, 0, True)
    space = ParamSpace({"u": UnitaryBlock(e.dim)})
    temp = [0.0]

    def fun(vals):
        u = vals["u"]
        if temp[0] > 0:
            val, g = _smoothed_success(weighted, u, temp[0])
        else:
            val, g, _ = _grouped_success(weighted, u)
        return -val, {"u": -g}

    prob = Problem(space, fun, -1.0)
    scale = float(e.priors.max())
    salt = stream_salt("vn")
    best_x, best_val, values, iters = None, np.inf, [], 0
    for i in range(max(1, config.restarts)):
        x = space.random(restart_rng(config.seed, salt, i))
        for t in SMOOTHING_SCHEDULE:
            temp[0] = t * scale
            x, _, info, _ = _local_descent(prob, x, config)
            iters += info["iterations"]
        temp[0] = 0.0
        x, val, info, _ = _local_descent(prob, x, config)
        iters += info["iterations"]
        values.append(val)
        if val < best_val:
            best_x, best_val, best_info = x, val, info
        if best_val <= -1.0 + config.value_tol:
            break
    u = space.values(best_x)["u"]
    val, _, best = _grouped_success(weighted, u)
    diag = {"restart_values": values, "restarts_used": len(values), "iterations": iters,
            "grad_norm": best_info["grad_norm"], "success": best_info["success"]}
    return _report(val, {"unitary": u, "assignment": best, "params": best_x}, diag)


def ensemble_from_extension(rho_ext: DensityMatrix, basis: np.ndarray, cut: Sequence[str] = ("a", "a'"),
                            drop_below: float = ZERO_WEIGHT) -> DiscriminationEnsemble:
    """``eta_i = tr <alpha_i| rho |alpha_i>`` and ``rho_i = sqrt(rho) (|alpha_i><alpha_i| (x) I) sqrt(rho) / eta_i``."""
    mat, dcl, db, order = rho_ext.bipartition(cut)
    basis = np.asarray(basis, dtype=complex)
    if basis.shape != (dcl, dcl) or not linalg.is_orthonormal(basis):
        raise IncompleteBasis("basis must be a complete orthonormal family on the classical cut")
    r = linalg.matrix_sqrt(mat)
    # rho_ext itself is expressed in the reordered layout (cut first)
    etas, hyps = [], []
    layout = SubsystemLayout(tuple((lab, rho_ext.layout.dim(lab)) for lab in order))
    for i in range(dcl):
        proj = np.kron(np.outer(basis[:, i], basis[:, i].conj()), np.eye(db))
        t = r @ proj @ r
        eta = float(np.trace(t).real)
        if eta < drop_below:
            continue
        etas.append(eta)
        hyps.append(DensityMatrix.from_array(t / eta, layout))
    etas = np.array(etas)
    return DiscriminationEnsemble(etas / etas.sum(), hyps)


def extension_discrimination_problem(setup: ExtensionSetup) -> Problem:
    """Negative grouped vN success for the ensemble induced by (extension, basis on aa').

    With ``rho = A A^+`` the sub-normalized hypotheses are ``sqrt(rho) C_i sqrt(rho)``.
    Measuring them with a rank-1 basis ``w_j`` scores ``|C_i sqrt(rho) w_j|^2``, and
    ``sqrt(rho) w_j = A g_j`` where the ``g_j`` form the columns of a co-isometry
    ``G`` (``G G^+ = I``). Parametrizing ``G`` directly avoids the square root,
    which is not smooth at rank-deficient extensions.
    """
    n = setup.dl * setup.dr
    space = ParamSpace({"v": setup.isometry_block(), "ua": UnitaryBlock(setup.dl),
                        "g": IsometryBlock(n, setup.dim_f)})
    dcl, db = setup.dl, setup.dr

    def fun(vals):
        a = setup.ext_factor(vals["v"])
        u, frame = vals["ua"], vals["g"]
        ymat = a @ frame.conj().T
        y = ymat.T.reshape(n, dcl, db)
        z = np.einsum("xi,jxb->jib", u.conj(), y)
        scores = np.einsum("jib,jib->ji", z, z.conj()).real
        best = np.argmax(scores, axis=1)
        idx = np.arange(n)
        val = float(np.sum(scores[idx, best]))
        zb = z[idx, best]
        gu = np.zeros_like(u)
        np.add.at(gu.T, best, 2.0 * np.einsum("jxb,jb->jx", y, zb.conj()))
        gy = 2.0 * np.einsum("xj,jb->jxb", u[:, best], zb).reshape(n, -1).T
        ga = gy @ frame
        gg = gy.conj().T @ a
        return -val, {"v": -setup.ext_pullback(ga), "ua": -gu, "g": -gg}

    return Problem(space, fun, -1.0)


@dataclass
class CorollaryResult:
    lhs: float
    rhs: float
    gap: float
    entanglement: MeasureReport
    discrimination: MeasureReport


def verify_corollary(rho: DensityMatrix, config: OptimizerConfig | None = None, dims_schedule=None) -> CorollaryResult:
    """Compare ``F(rho, S)^2`` with the best vN discrimination of extension-induced ensembles."""
    config = config or OptimizerConfig()
    if len(rho.dims) != 2:
        raise LayoutMismatch("the correspondence is stated for two-party layouts")
    ent = bures_entanglement(rho, config=config)
    lhs = (1.0 - ent.value / 2.0) ** 2
    da, db = rho.dims
    schedule = _normalize_schedule(dims_schedule or config.dims_schedule or default_schedule(da, db, Side.LEFT),
                                   Side.LEFT)
    best = None
    per_dim = []
    prev = None
    used = 0
    for anc in schedule:
        setup = ExtensionSetup(rho, anc)
        prob = extension_discrimination_problem(setup)
        warm = []
        if prev is not None:
            warm.append(prob.space.encode(_embed_discrimination(prev[0], prev[1], setup)))
        x, val, diag = run_multistart(prob, config, stream_salt(f"ext-discrimination:{anc}"), warm_starts=warm)
        used += diag["restarts_used"]
        vals = prob.space.values(x)
        per_dim.append({"ancilla": list(anc), "value": -val})
        if best is None or val < best[0]:
            best = (val, setup, vals, x, diag)
        prev = (setup, vals)
        if val <= -1.0 + config.value_tol:
            break
    val, setup, vals, x, diag = best
    a = setup.ext_factor(vals["v"])
    ext = DensityMatrix.from_array(a @ a.conj().T, setup.layout)
    rhs = -val
    values = [d["value"] for d in per_dim]
    # values are maximized here, so compare their negatives
    plateau = schedule_plateau([-v for v in values], config.value_tol) or rhs >= 1 - config.value_tol
    cert = {"extension": ext, "basis": vals["ua"], "measurement": _measurement_basis(a, vals["g"]), "params": x}
    disc = _report(rhs, cert, dict(diag, restarts_used=used), {"schedule": per_dim, "plateau": bool(plateau)})
    disc.converged = bool(plateau)
    return CorollaryResult(lhs=float(lhs), rhs=float(rhs), gap=float(lhs - rhs), entanglement=ent,
                           discrimination=disc)


def _measurement_basis(a: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """An orthonormal basis ``w`` with ``sqrt(A A^+) w = A G`` for ``G = frame^+``."""
    p, s, qh = np.linalg.svd(a, full_matrices=True)
    k = int(np.sum(s > 1e-12))
    f = p[:, :k] @ qh[:k] @ frame.conj().T
    # the columns of f are a Parseval frame of range(rho); lift it with the kernel
    comp = np.eye(f.shape[1]) - f.conj().T @ f
    w, e = np.linalg.eigh(0.5 * (comp + comp.conj().T))
    e = e[:, np.argsort(w)[::-1][: a.shape[0] - k]]
    return f + p[:, k:] @ e.conj().T


def _embed_discrimination(old: ExtensionSetup, vals: dict, new: ExtensionSetup) -> dict:
    old_shape = list(old.ancilla) + [old.dim_f, old.rank]
    new_shape = list(new.ancilla) + [new.dim_f, new.rank]
    v = np.pad(vals["v"].reshape(old_shape), [(0, n - o) for o, n in zip(old_shape, new_shape)])
    ua = _embed_basis(vals["ua"], [old.da, old.ancilla[0]], [new.da, new.ancilla[0]])
    # frame rows live on (a, a', b), columns on the disposal space F
    g = vals["g"]
    rows = _embed_basis(g, [old.da, old.ancilla[0], old.db], [new.da, new.ancilla[0], new.db])[:, : g.shape[1]]
    cols = np.zeros((rows.shape[0], new.dim_f), dtype=complex)
    cols[:, : g.shape[1]] = rows
    return {"v": v.reshape(-1, new.rank), "ua": ua, "g": linalg.complete_basis(cols[:, : g.shape[1]])[:, : new.dim_f]}
