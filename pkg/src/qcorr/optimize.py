"""Multi-start minimization over parameterized manifolds and the closest-set searches."""
from __future__ import annotations

import dataclasses
import zlib
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import kernels, linalg
from .errors import BadParameter, NonFinite
from .parametrize import ComplexBlock, ParamSpace, SimplexBlock, UnitaryBlock
from .states import DensityMatrix, SeparableAnsatz, SubsystemLayout

INF_PENALTY = 1e6


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 16
    max_iters: int = 2000
    step_tol: float = 1e-7
    value_tol: float = 1e-9
    seed: int = 0
    alternating: bool = False
    dims_schedule: tuple | None = None

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1:
            raise BadParameter("restarts and max_iters must be positive")
        if self.step_tol <= 0 or self.value_tol <= 0:
            raise BadParameter("tolerances must be positive")
        if self.dims_schedule is not None:
            sched = tuple(tuple(int(v) for v in d) if isinstance(d, (tuple, list)) else int(d)
                          for d in self.dims_schedule)
            object.__setattr__(self, "dims_schedule", sched)

    def replace(self, **changes) -> "OptimizerConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["dims_schedule"] is not None:
            d["dims_schedule"] = [list(x) if isinstance(x, tuple) else x for x in d["dims_schedule"]]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise BadParameter(f"unknown config keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class MeasureReport:
    value: float
    certificate: dict = field(default_factory=dict)
    restarts_used: int = 0
    converged: bool = True
    trace: list | None = None
    diagnostics: dict = field(default_factory=dict)


@dataclass
class Problem:
    """Objective on the decoded block values of a :class:`ParamSpace`.

    ``fun(values)`` returns ``(value, grads)`` where ``grads`` maps block names
    to value-space gradients, or ``None`` to request central differences.
    """

    space: ParamSpace
    fun: Callable[[dict], tuple[float, dict | None]]
    lower_bound: float | None = None

    def value(self, x: np.ndarray) -> float:
        vals, _ = self.space.decode(x)
        return float(self.fun(vals)[0])

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        vals, caches = self.space.decode(x)
        val, grads = self.fun(vals)
        val = float(val)
        if np.isnan(val):
            raise NonFinite("objective returned NaN")
        if np.isinf(val):
            return val, np.zeros_like(x)
        if grads is None:
            return val, numeric_gradient(self.value, x)
        return val, self.space.pullback(x, caches, grads)


def numeric_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, rel_step: float = 1e-5) -> np.ndarray:
    """Central differences with step ``rel_step * max(1, |x_i|)``."""
    g = np.empty_like(x, dtype=float)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def stream_salt(name: str) -> int:
    return zlib.crc32(name.encode())


def restart_rng(seed: int, salt: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, salt, index])


def _local_descent(problem: Problem, x0: np.ndarray, config: OptimizerConfig, free: np.ndarray | None = None,
                   record: bool = False):
    trace = [] if record else None
    base = x0.copy()

    def full(z):
        if free is None:
            return z
        x = base.copy()
        x[free] = z
        return x

    def fg(z):
        # infeasible or overflowing points get a flat penalty so the line search backs off
        if not np.all(np.isfinite(z)):
            return INF_PENALTY, np.zeros_like(z)
        try:
            val, g = problem.value_and_grad(full(z))
        except np.linalg.LinAlgError:
            return INF_PENALTY, np.zeros_like(z)
        if np.isinf(val) or not np.all(np.isfinite(g)):
            return INF_PENALTY, np.zeros_like(z)
        return val, (g if free is None else g[free])

    def cb(intermediate_result):
        if trace is not None:
            trace.append((len(trace) + 1, float(intermediate_result.fun)))

    z0 = x0 if free is None else x0[free]
    if z0.size == 0:
        val, _ = problem.value_and_grad(x0)
        return x0, val, {"iterations": 0, "success": True, "grad_norm": 0.0}, trace
    res = minimize(fg, z0, jac=True, method="L-BFGS-B", callback=cb,
                   options={"maxiter": config.max_iters, "ftol": config.value_tol, "gtol": config.step_tol,
                            "maxcor": 20})
    x = full(res.x)
    if not np.all(np.isfinite(x)):
        x = x0.copy()
    val = problem.value(x)
    info = {"iterations": int(res.nit), "success": bool(res.success or res.nit < config.max_iters),
            "grad_norm": float(np.linalg.norm(res.jac)) if res.jac is not None else float("nan")}
    return x, val, info, trace


def _alternating_descent(problem, x0, config, groups, record):
    x = x0.copy()
    val = problem.value(x)
    trace = [] if record else None
    iters = 0
    info = {}
    for sweep in range(200):
        prev = val
        for g in groups:
            x, val, info, _ = _local_descent(problem, x, config, problem.space.block_indices(g))
            iters += info["iterations"]
        if trace is not None:
            trace.append((sweep + 1, val))
        if prev - val <= config.value_tol * max(1.0, abs(val)):
            break
    info = dict(info, iterations=iters, sweeps=sweep + 1)
    return x, val, info, trace


def run_multistart(problem: Problem, config: OptimizerConfig, salt: int,
                   warm_starts: Sequence[np.ndarray] = (), groups: Sequence[Sequence[str]] | None = None,
                   init_scale: float = 1.0) -> tuple[np.ndarray, float, dict]:
    """Warm starts first, then ``config.restarts`` seeded Gaussian starts; lowest value wins.

    Ties keep the earliest start. Stops early once the objective's lower bound
    is reached within ``value_tol``.
    """
    best_x, best_val, best_info, best_trace = None, np.inf, {}, None
    values = []
    starts = [np.asarray(w, dtype=float) for w in warm_starts]
    n_total = len(starts) + config.restarts
    used = 0
    for i in range(n_total):
        if i < len(starts):
            x0 = starts[i]
        else:
            x0 = init_scale * problem.space.random(restart_rng(config.seed, salt, i - len(starts)))
        if config.alternating and groups:
            x, val, info, trace = _alternating_descent(problem, x0, config, groups, True)
        else:
            x, val, info, trace = _local_descent(problem, x0, config, record=True)
        used += 1
        values.append(val)
        if val < best_val or best_x is None:
            best_x, best_val, best_info, best_trace = x, val, info, trace
        if problem.lower_bound is not None and best_val <= problem.lower_bound + config.value_tol:
            break
    diag = {"restart_values": values, "warm_starts": len(starts), "restarts_used": used,
            "iterations": best_info.get("iterations", 0), "grad_norm": best_info.get("grad_norm", float("nan")),
            "success": best_info.get("success", False), "trace": best_trace}
    return best_x, float(best_val), diag


def _report(value, certificate, diag, extra=None) -> MeasureReport:
    d = {k: v for k, v in diag.items() if k != "trace"}
    if extra:
        d.update(extra)
    return MeasureReport(value=float(value), certificate=certificate, restarts_used=int(diag["restarts_used"]),
                         converged=bool(diag["success"]), trace=diag.get("trace"), diagnostics=d)


# generic manifold searches -------------------------------------------------


def minimize_over_unitaries(objective: Callable[[np.ndarray], float], dim: int, config: OptimizerConfig | None = None,
                            gradient: Callable[[np.ndarray], np.ndarray] | None = None,
                            lower_bound: float | None = None, salt: str = "unitary") -> MeasureReport:
    """Minimize ``objective(U)`` over ``dim x dim`` unitaries ``U = exp(iH)``.

    Without ``gradient`` the descent uses central differences in the ``dim**2``
    real parameters of ``H``.
    """
    config = config or OptimizerConfig()
    space = ParamSpace({"u": UnitaryBlock(dim)})

    def fun(vals):
        u = vals["u"]
        return objective(u), (None if gradient is None else {"u": gradient(u)})

    prob = Problem(space, fun, lower_bound)
    x, val, diag = run_multistart(prob, config, stream_salt(salt))
    u = space.values(x)["u"]
    return _report(objective(u), {"unitary": u, "params": x}, diag)


def minimize_over_simplex(objective: Callable[[np.ndarray], float], k: int, config: OptimizerConfig | None = None,
                          gradient: Callable[[np.ndarray], np.ndarray] | None = None,
                          lower_bound: float | None = None, salt: str = "simplex") -> MeasureReport:
    config = config or OptimizerConfig()
    space = ParamSpace({"p": SimplexBlock(k)})

    def fun(vals):
        p = vals["p"]
        return objective(p), (None if gradient is None else {"p": gradient(p)})

    prob = Problem(space, fun, lower_bound)
    x, val, diag = run_multistart(prob, config, stream_salt(salt))
    p = space.values(x)["p"]
    return _report(objective(p), {"weights": p, "params": x}, diag)


# closest-set searches ------------------------------------------------------


def state_factor(mat: np.ndarray) -> np.ndarray:
    return linalg.psd_factor(mat, cutoff=linalg.SUPPORT_CUTOFF * 1e-3)


def _restore(mat: np.ndarray, rho: DensityMatrix, order: list[str]) -> DensityMatrix:
    dims = [rho.layout.dim(lab) for lab in order]
    perm = [order.index(lab) for lab in rho.labels]
    return DensityMatrix.from_array(linalg.permute_subsystems(mat, dims, perm), rho.layout)


def _check_distance(distance: str) -> str:
    aliases = {"bures": "bures", "bures_sq": "bures", "relent": "relent"}
    if distance not in aliases:
        raise BadParameter(f"unknown distance {distance!r}")
    return aliases[distance]


def cq_problem(target: np.ndarray, dcl: int, db: int, distance: str) -> Problem:
    """Distance from a fixed factor ``target`` to CQ states classical on a ``dcl``-dim left factor."""
    space = ParamSpace({"u": UnitaryBlock(dcl), "b": ComplexBlock((dcl, db, db))})

    def fun(vals):
        w = kernels.cq_factor(vals["u"], vals["b"])
        val, _, gw = kernels.distance_factors(distance, target, w, want_a=False)
        if gw is None:
            return val, {}
        gu, gb = kernels.cq_pullback(vals["u"], vals["b"], gw)
        return val, {"u": gu, "b": gb}

    return Problem(space, fun, 0.0)


def cc_problem(target: np.ndarray, da: int, db: int, distance: str) -> Problem:
    space = ParamSpace({"ua": UnitaryBlock(da), "ub": UnitaryBlock(db), "c": ComplexBlock((da * db,))})

    def fun(vals):
        k = np.kron(vals["ua"], vals["ub"])
        w = kernels.scaled_columns(k, vals["c"])
        val, _, gw = kernels.distance_factors(distance, target, w, want_a=False)
        if gw is None:
            return val, {}
        gk, gc = kernels.scaled_columns_pullback(k, vals["c"], gw)
        gua, gub = kernels.kron_pullback(vals["ua"], vals["ub"], gk)
        return val, {"ua": gua, "ub": gub, "c": gc}

    return Problem(space, fun, 0.0)


def separable_problem(target: np.ndarray, da: int, db: int, terms: int, distance: str) -> Problem:
    space = ParamSpace({"left": ComplexBlock((terms, da)), "right": ComplexBlock((terms, db))})

    def fun(vals):
        w = kernels.sep_factor(vals["left"], vals["right"])
        val, _, gw = kernels.distance_factors(distance, target, w, want_a=False)
        if gw is None:
            return val, {}
        gl, gr = kernels.sep_pullback(vals["left"], vals["right"], gw)
        return val, {"left": gl, "right": gr}

    return Problem(space, fun, 0.0)


def _normalized_state(w: np.ndarray) -> np.ndarray:
    s = w @ w.conj().T
    return s / np.trace(s).real


def closest_cq(rho: DensityMatrix, cut: Sequence[str] = ("a",), distance: str = "bures",
               config: OptimizerConfig | None = None) -> MeasureReport:
    """Minimal distance from ``rho`` to states classical on the ``cut`` labels."""
    config = config or OptimizerConfig()
    distance = _check_distance(distance)
    mat, dcl, db, order = rho.bipartition(cut)
    prob = cq_problem(state_factor(mat), dcl, db, distance)
    x, val, diag = run_multistart(prob, config, stream_salt(f"cq:{distance}"))
    vals = prob.space.values(x)
    sigma_mat = _normalized_state(kernels.cq_factor(vals["u"], vals["b"]))
    sigma = _restore(sigma_mat, rho, order)
    bnorm = np.einsum("ibc,ibc->i", vals["b"], vals["b"].conj()).real
    weights = bnorm / bnorm.sum()
    cert = {"state": sigma, "basis": vals["u"], "weights": weights, "params": x}
    return _report(val, cert, diag)


def closest_cc(rho: DensityMatrix, cut: Sequence[str] = ("a",), distance: str = "bures",
               config: OptimizerConfig | None = None) -> MeasureReport:
    """Minimal distance from ``rho`` to states classical on both sides of the cut."""
    config = config or OptimizerConfig()
    distance = _check_distance(distance)
    mat, da, db, order = rho.bipartition(cut)
    prob = cc_problem(state_factor(mat), da, db, distance)
    x, val, diag = run_multistart(prob, config, stream_salt(f"cc:{distance}"))
    vals = prob.space.values(x)
    w = kernels.scaled_columns(np.kron(vals["ua"], vals["ub"]), vals["c"])
    sigma = _restore(_normalized_state(w), rho, order)
    p = np.abs(vals["c"]) ** 2
    cert = {"state": sigma, "basis_left": vals["ua"], "basis_right": vals["ub"],
            "weights": (p / p.sum()).reshape(da, db), "params": x}
    return _report(val, cert, diag)


def default_terms(da: int, db: int) -> int:
    return (da * db) ** 2


def closest_separable(rho: DensityMatrix, terms: int | None = None, distance: str = "bures",
                      config: OptimizerConfig | None = None, cut: Sequence[str] = ("a",)) -> MeasureReport:
    """Minimal distance from ``rho`` to mixtures of ``terms`` pure product states."""
    config = config or OptimizerConfig()
    distance = _check_distance(distance)
    mat, da, db, order = rho.bipartition(cut)
    terms = default_terms(da, db) if terms is None else int(terms)
    if terms < 1:
        raise BadParameter("the separable ansatz needs at least one term")
    prob = separable_problem(state_factor(mat), da, db, terms, distance)
    x, val, diag = run_multistart(prob, config, stream_salt(f"sep:{distance}"))
    vals = prob.space.values(x)
    w = kernels.sep_factor(vals["left"], vals["right"])
    sigma = _restore(_normalized_state(w), rho, order)
    cert = {"state": sigma, "ansatz": separable_certificate(vals["left"], vals["right"]), "params": x}
    return _report(val, cert, diag, {"terms": terms})


def separable_certificate(left: np.ndarray, right: np.ndarray) -> SeparableAnsatz:
    nl = np.einsum("ka,ka->k", left, left.conj()).real
    nr = np.einsum("kb,kb->k", right, right.conj()).real
    wts = nl * nr
    keep = wts > 0
    wts = wts[keep] / wts[keep].sum()
    da, db = left.shape[1], right.shape[1]
    la = SubsystemLayout((("a", da),))
    lb = SubsystemLayout((("b", db),))
    lefts = [DensityMatrix.from_pure(v, la) for v in left[keep]]
    rights = [DensityMatrix.from_pure(v, lb) for v in right[keep]]
    return SeparableAnsatz(wts, lefts, rights)
