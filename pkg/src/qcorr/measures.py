"""Base quantifiers on a fixed bipartition: discord, Bures entanglement, convex roof, E_r."""
from __future__ import annotations

from enum import Enum
from typing import Sequence

import numpy as np

from . import kernels, linalg
from .errors import BadLength, BadParameter
from .geometry import entropy, pinch_matrix
from .optimize import (
    MeasureReport,
    OptimizerConfig,
    Problem,
    _report,
    _restore,
    closest_cc,
    closest_cq,
    closest_separable,
    run_multistart,
    stream_salt,
)
from .parametrize import IsometryBlock, ParamSpace, UnitaryBlock
from .states import DensityMatrix, Ensemble, SubsystemLayout


class Side(str, Enum):
    LEFT = "left"
    BOTH = "both"


def as_side(side) -> Side:
    try:
        return Side(side.value if isinstance(side, Side) else str(side).lower())
    except ValueError:
        raise BadParameter(f"side must be 'left' or 'both', got {side!r}") from None


def bures_discord(rho: DensityMatrix, side=Side.LEFT, config: OptimizerConfig | None = None,
                  cut: Sequence[str] = ("a",)) -> MeasureReport:
    """Squared Bures distance to the CQ set (left) or CC set (both)."""
    if as_side(side) is Side.LEFT:
        return closest_cq(rho, cut, "bures", config)
    return closest_cc(rho, cut, "bures", config)


def relent_discord_via_cq(rho: DensityMatrix, side=Side.LEFT, config: OptimizerConfig | None = None,
                          cut: Sequence[str] = ("a",)) -> MeasureReport:
    """Relative entropy to the CQ (or CC) set, searched over the set itself."""
    if as_side(side) is Side.LEFT:
        return closest_cq(rho, cut, "relent", config)
    return closest_cc(rho, cut, "relent", config)


def pinching_problem(mat: np.ndarray, da: int, db: int, side: Side) -> Problem:
    """``S(P(rho))`` over local projective pinchings; left pinches ``da``, both pinches ``da`` and ``db``."""
    if side is Side.LEFT:
        space = ParamSpace({"ua": UnitaryBlock(da)})

        def fun(vals):
            val, _, gu = kernels.pinched_entropy(mat, vals["ua"], da)
            return val, {"ua": gu}
    else:
        space = ParamSpace({"ua": UnitaryBlock(da), "ub": UnitaryBlock(db)})

        def fun(vals):
            k = np.kron(vals["ua"], vals["ub"])
            val, _, gk = kernels.pinched_entropy(mat, k, da * db)
            gua, gub = kernels.kron_pullback(vals["ua"], vals["ub"], gk)
            return val, {"ua": gua, "ub": gub}

    return Problem(space, fun, None)


def relent_discord(rho: DensityMatrix, side=Side.LEFT, config: OptimizerConfig | None = None,
                   cut: Sequence[str] = ("a",)) -> MeasureReport:
    """Measurement form ``min_P S(P(rho)) - S(rho)`` over local projective pinchings."""
    config = config or OptimizerConfig()
    side = as_side(side)
    mat, da, db, order = rho.bipartition(cut)
    s_rho = entropy(mat)
    prob = pinching_problem(mat, da, db, side)
    prob.lower_bound = s_rho
    x, val, diag = run_multistart(prob, config, stream_salt(f"pinch:{side.value}"))
    vals = prob.space.values(x)
    if side is Side.LEFT:
        basis, dcl = vals["ua"], da
        cert = {"basis": basis}
    else:
        basis, dcl = np.kron(vals["ua"], vals["ub"]), da * db
        cert = {"basis_left": vals["ua"], "basis_right": vals["ub"]}
    pinched = pinch_matrix(mat, basis, dcl)
    cert.update(state=_restore(pinched, rho, order), params=x)
    return _report(max(0.0, val - s_rho), cert, diag)


def bures_entanglement(rho: DensityMatrix, terms: int | None = None, config: OptimizerConfig | None = None,
                       cut: Sequence[str] = ("a",)) -> MeasureReport:
    """Squared Bures distance to the separable set."""
    return closest_separable(rho, terms, "bures", config, cut)


def relent_entanglement(rho: DensityMatrix, terms: int | None = None, config: OptimizerConfig | None = None,
                        cut: Sequence[str] = ("a",)) -> MeasureReport:
    """Relative entropy of entanglement."""
    return closest_separable(rho, terms, "relent", config, cut)


def pure_bures_entanglement(psi, dims: tuple[int, int]) -> tuple[float, np.ndarray]:
    """``2 (1 - sqrt(lambda_1))`` and the closest product vector ``|x_1, y_1>``."""
    lam, left, right = linalg.schmidt(psi, dims)
    value = 2.0 * (1.0 - np.sqrt(lam[0]))
    return max(0.0, float(value)), np.kron(left[:, 0], right[:, 0])


def default_decomposition_length(rank: int) -> int:
    return min(rank * (rank + 1) // 2, rank * rank)


def convex_roof_problem(psi0: np.ndarray, m: int) -> Problem:
    """Average pure-state Bures entanglement over length-``m`` decompositions of ``psi0 psi0^+``.

    Decomposition vectors are ``sum_k V[j, k] psi0[:, :, k]`` for an isometry
    ``V``; every decomposition of that length arises this way.
    """
    da, db, r = psi0.shape
    space = ParamSpace({"v": IsometryBlock(m, r)})

    def fun(vals):
        v = vals["v"]
        mats = np.einsum("jk,abk->jab", v, psi0)
        u, s, vh = np.linalg.svd(mats, full_matrices=False)
        # p_j E(psi_j) = 2 p_j - 2 sqrt(p_j) smax_j with p_j = |M_j|_F^2
        p = np.einsum("jab,jab->j", mats, mats.conj()).real
        rp = np.sqrt(p)
        smax = s[:, 0]
        val = 2.0 - 2.0 * float(np.sum(rp * smax))
        ratio = np.divide(smax, rp, out=np.zeros_like(smax), where=rp > 0)
        top = u[:, :, 0][:, :, None] * vh[:, 0, :][:, None, :]
        g = -2.0 * (ratio[:, None, None] * mats + rp[:, None, None] * top)
        gv = np.einsum("jab,abk->jk", g, psi0.conj())
        return val, {"v": gv}

    return Problem(space, fun, 0.0)


def purification_factor(mat: np.ndarray, da: int, db: int) -> np.ndarray:
    """``psi0`` of shape (da, db, rank) with ``sum_k psi0_k psi0_k^+ = rho`` in canonical order."""
    vec, r = linalg.purify(mat)
    return vec.reshape(da, db, r)


def convex_roof_bures(rho: DensityMatrix, m: int | None = None, config: OptimizerConfig | None = None,
                      cut: Sequence[str] = ("a",)) -> MeasureReport:
    """Convex roof of the pure-state Bures entanglement over length-``m`` decompositions."""
    config = config or OptimizerConfig()
    mat, da, db, order = rho.bipartition(cut)
    psi0 = purification_factor(mat, da, db)
    r = psi0.shape[2]
    m = default_decomposition_length(r) if m is None else int(m)
    if m < r:
        raise BadLength(f"decomposition length {m} is below the rank {r}")
    prob = convex_roof_problem(psi0, m)
    x, val, diag = run_multistart(prob, config, stream_salt("roof"))
    v = prob.space.values(x)["v"]
    vecs = np.einsum("jk,abk->jab", v, psi0).reshape(m, -1)
    p = np.einsum("ja,ja->j", vecs, vecs.conj()).real
    keep = p > 1e-14
    layout = SubsystemLayout.bipartite(da, db)
    members = [DensityMatrix.from_pure(vec, layout) for vec in vecs[keep]]
    ens = Ensemble(p[keep] / p[keep].sum(), members)
    cert = {"ensemble": ens, "isometry": v, "params": x}
    return _report(val, cert, diag, {"length": m, "rank": r})
