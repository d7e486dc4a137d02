"""Dense complex matrix kernel.

Everything here works on plain ``numpy`` arrays; subsystem labels live in
:mod:`qcorr.states`. Dimensions are a sequence of ints with the first factor
on the slowest index (the ``np.kron`` convention).
"""
from __future__ import annotations

from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

from .errors import NotHermitian, NotNormalized, NotPSD, NotSquare

SUPPORT_CUTOFF = 1e-12
CLAMP_TOL = 1e-10
PSD_TOL = 1e-8
HERMITIAN_TOL = 1e-8


class HermitianEigen(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def _check_square(h: np.ndarray) -> None:
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise NotSquare(f"expected a square matrix, got shape {h.shape}")


def check_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    _check_square(h)
    if not np.all(np.isfinite(h)):
        raise NotHermitian("matrix has non-finite entries")
    norm = np.linalg.norm(h)
    if np.linalg.norm(h - dagger(h)) > tol * max(norm, 1e-300):
        raise NotHermitian("matrix is not Hermitian within tolerance")


def eigh(h: np.ndarray, tol: float = HERMITIAN_TOL) -> HermitianEigen:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    h = np.asarray(h, dtype=complex)
    check_hermitian(h, tol)
    w, v = np.linalg.eigh(0.5 * (h + dagger(h)))
    return HermitianEigen(w, v)


def _psd_eigen(p: np.ndarray) -> HermitianEigen:
    w, v = eigh(p)
    if w.size and w[0] < -PSD_TOL:
        raise NotPSD(f"minimum eigenvalue {w[0]:.3e} is below -{PSD_TOL:g}")
    return HermitianEigen(np.clip(w, 0.0, None), v)


def matrix_sqrt(p: np.ndarray) -> np.ndarray:
    """Principal square root of a PSD matrix (small negative eigenvalues clamped)."""
    w, v = _psd_eigen(np.asarray(p, dtype=complex))
    return (v * np.sqrt(w)) @ dagger(v)


def matrix_log2(p: np.ndarray, support_cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    """Base-2 logarithm restricted to the support (0 log 0 := 0)."""
    w, v = _psd_eigen(np.asarray(p, dtype=complex))
    logs = np.zeros_like(w)
    on = w > support_cutoff
    logs[on] = np.log2(w[on])
    return (v * logs) @ dagger(v)


def psd_factor(p: np.ndarray, cutoff: float = 0.0) -> np.ndarray:
    """Thin factor ``A`` with ``A A^dagger = p``, dropping eigenvalues <= cutoff."""
    w, v = _psd_eigen(np.asarray(p, dtype=complex))
    keep = w > cutoff
    if not np.any(keep):
        return np.zeros((p.shape[0], 1), dtype=complex)
    return v[:, keep] * np.sqrt(w[keep])


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product, left factor on the slower index."""
    return reduce(np.kron, [np.asarray(o) for o in ops])


def permute_subsystems(mat: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of an operator: new factor k is old factor perm[k]."""
    dims = list(dims)
    n = len(dims)
    t = mat.reshape(dims + dims)
    t = t.transpose(list(perm) + [n + p for p in perm])
    d = int(np.prod(dims))
    return t.reshape(d, d)


def permute_vector(vec: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    return vec.reshape(list(dims)).transpose(list(perm)).reshape(-1)


def partial_trace(mat: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep``; kept factors stay in order."""
    dims = list(dims)
    n = len(dims)
    keep = sorted(set(keep))
    t = np.asarray(mat).reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[i] if i not in keep else letters[n + i].upper() for i in range(n)]
    out = [letters[i] for i in keep] + [letters[n + i].upper() for i in keep]
    d = int(np.prod([dims[i] for i in keep])) if keep else 1
    res = np.einsum("".join(row) + "".join(col) + "->" + "".join(out), t)
    return res.reshape(d, d)


def partial_transpose(mat: np.ndarray, dims: Sequence[int], sys: int) -> np.ndarray:
    dims = list(dims)
    n = len(dims)
    t = mat.reshape(dims + dims)
    axes = list(range(2 * n))
    axes[sys], axes[n + sys] = axes[n + sys], axes[sys]
    d = int(np.prod(dims))
    return t.transpose(axes).reshape(d, d)


def purify(rho: np.ndarray, support_cutoff: float = SUPPORT_CUTOFF) -> tuple[np.ndarray, int]:
    """Canonical purification ``sum_k sqrt(mu_k) |v_k>|k>`` with mu descending.

    Returns the vector on system (slow index) times ancilla and the ancilla
    dimension, which equals the numerical rank of ``rho``.
    """
    w, v = _psd_eigen(np.asarray(rho, dtype=complex))
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    r = max(1, int(np.sum(w > support_cutoff)))
    factor = v[:, :r] * np.sqrt(w[:r])
    return factor.reshape(-1), r


def schmidt(psi: np.ndarray, dims: tuple[int, int], tol: float = 1e-10):
    """Schmidt decomposition of a normalized bipartite vector.

    Returns ``(lam, left, right)`` where ``lam`` are the squared Schmidt
    coefficients in descending order and ``left[:, i]``, ``right[:, i]`` are
    the matching local vectors, so ``psi = sum_i sqrt(lam_i) left_i (x) right_i``.
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(psi) - 1.0) > tol:
        raise NotNormalized(f"state norm {np.linalg.norm(psi):.12f} differs from 1")
    da, db = dims
    u, s, vh = np.linalg.svd(psi.reshape(da, db), full_matrices=False)
    return s**2, u, vh.T


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def is_orthonormal(vectors: np.ndarray, tol: float = 1e-10) -> bool:
    g = dagger(vectors) @ vectors
    return bool(np.linalg.norm(g - np.eye(g.shape[0])) <= tol)


def complete_basis(vectors: np.ndarray) -> np.ndarray:
    """Extend orthonormal columns to a full unitary (deterministically)."""
    n, k = vectors.shape
    if k == n:
        return vectors.copy()
    proj = np.eye(n) - vectors @ dagger(vectors)
    w, v = np.linalg.eigh(0.5 * (proj + dagger(proj)))
    extra = v[:, np.argsort(w)[::-1][: n - k]]
    return np.hstack([vectors, extra])


def von_neumann_entropy(rho: np.ndarray) -> float:
    w = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))
    w = w[w > SUPPORT_CUTOFF]
    return float(-np.sum(w * np.log2(w)))
