"""Distance functionals between density matrices and projective pinching."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg
from .errors import BasisMismatch, DimensionMismatch, IncompleteBasis
from .states import DensityMatrix

INF = float("inf")
BASIS_TOL = 1e-10


def _mat(x) -> np.ndarray:
    return x.mat if isinstance(x, DensityMatrix) else np.asarray(x, dtype=complex)


def _same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"operator shapes differ: {a.shape} vs {b.shape}")


def fidelity(rho, sigma) -> float:
    """Root fidelity ``tr sqrt(sqrt(sigma) rho sqrt(sigma))`` clamped to [0, 1]."""
    r, s = _mat(rho), _mat(sigma)
    _same_dim(r, s)
    rs = linalg.matrix_sqrt(s)
    w = np.linalg.eigvalsh(linalg.dagger(rs) @ r @ rs)
    val = float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
    return min(max(val, 0.0), 1.0)


def bures_distance_sq(rho, sigma) -> float:
    return max(0.0, 2.0 - 2.0 * fidelity(rho, sigma))


def bures_distance(rho, sigma) -> float:
    return float(np.sqrt(bures_distance_sq(rho, sigma)))


def entropy(rho) -> float:
    return linalg.von_neumann_entropy(_mat(rho))


def relative_entropy(rho, sigma, support_cutoff: float = linalg.SUPPORT_CUTOFF) -> float:
    """``tr rho (log2 rho - log2 sigma)``; returns ``INF`` when supp(rho) is not inside supp(sigma)."""
    r, s = _mat(rho), _mat(sigma)
    _same_dim(r, s)
    wr, vr = np.linalg.eigh(0.5 * (r + r.conj().T))
    ws, vs = np.linalg.eigh(0.5 * (s + s.conj().T))
    # weight of each sigma eigenvector inside rho
    overlap = np.real(np.einsum("ij,jk,ki->i", vs.conj().T, r, vs))
    off = ws <= support_cutoff
    if np.any(overlap[off] > support_cutoff):
        return INF
    on = wr > support_cutoff
    term_rho = float(np.sum(wr[on] * np.log2(wr[on])))
    logs = np.zeros_like(ws)
    logs[~off] = np.log2(ws[~off])
    term_sigma = float(np.sum(overlap * logs))
    return max(0.0, term_rho - term_sigma)


@dataclass(frozen=True)
class PinchingMap:
    """Complete rank-1 projective family ``{|i><i|}`` on the ``cut`` labels (columns of ``basis``)."""

    cut: tuple[str, ...]
    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "cut", tuple(self.cut))
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise IncompleteBasis("pinching basis must be a square matrix of column vectors")
        if not linalg.is_orthonormal(b, BASIS_TOL):
            raise IncompleteBasis("pinching basis is not complete and orthonormal")


def pinch_matrix(mat: np.ndarray, basis: np.ndarray, left_dim: int) -> np.ndarray:
    """Pinch the first ``left_dim`` tensor factor of ``mat`` in ``basis`` (identity on the rest)."""
    d = mat.shape[0]
    db = d // left_dim
    t = mat.reshape(left_dim, db, left_dim, db)
    blocks = np.einsum("xi,xbyc,yi->ibc", basis.conj(), t, basis)
    out = np.einsum("xi,ibc,yi->xbyc", basis, blocks, basis.conj())
    return out.reshape(d, d)


def pinch(rho: DensityMatrix, pmap: PinchingMap) -> DensityMatrix:
    """Apply the pinching on ``pmap.cut``; the output keeps the layout of ``rho``."""
    idx = [rho.layout.index(lab) for lab in pmap.cut]
    cut_dim = int(np.prod([rho.dims[i] for i in idx]))
    if pmap.basis.shape[0] != cut_dim:
        raise DimensionMismatch(f"basis dimension {pmap.basis.shape[0]} does not match cut dimension {cut_dim}")
    n = len(rho.dims)
    rest = [i for i in range(n) if i not in idx]
    perm = sorted(idx) + rest
    moved = linalg.permute_subsystems(rho.mat, rho.dims, perm)
    # basis is written in layout order of the cut labels; align with sorted order
    order = sorted(range(len(idx)), key=lambda k: idx[k])
    basis = pmap.basis
    if order != list(range(len(idx))):
        cut_dims = [rho.dims[i] for i in idx]
        basis = basis.reshape(cut_dims + [cut_dim]).transpose(order + [len(idx)]).reshape(cut_dim, cut_dim)
    out = pinch_matrix(moved, basis, cut_dim)
    inv = np.argsort(perm)
    new_dims = [rho.dims[p] for p in perm]
    return DensityMatrix.from_array(linalg.permute_subsystems(out, new_dims, inv), rho.layout)


def relent_cq_decomposition(rho: DensityMatrix, sigma_cq: DensityMatrix, pmap: PinchingMap,
                            tol: float = 1e-8) -> tuple[float, float]:
    """Both sides of ``S(rho||sigma) = S(P rho) - S(rho) + S(P rho||sigma)`` for a pinching ``P``
    under which ``sigma`` is invariant."""
    if np.linalg.norm(pinch(sigma_cq, pmap).mat - sigma_cq.mat) > tol:
        raise BasisMismatch("sigma is not classical in the pinching basis")
    pr = pinch(rho, pmap)
    lhs = relative_entropy(rho, sigma_cq)
    rhs = entropy(pr) - entropy(rho) + relative_entropy(pr, sigma_cq)
    return lhs, rhs


def local_unitary(rho: DensityMatrix, unitaries: Sequence[np.ndarray]) -> DensityMatrix:
    u = linalg.tensor(*unitaries)
    return DensityMatrix.from_array(u @ rho.mat @ u.conj().T, rho.layout)
