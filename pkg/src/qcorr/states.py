"""State model: labelled layouts, validated density matrices and named constructors."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import linalg
from .errors import (
    AncillaTooSmall,
    BadDistribution,
    BadParameter,
    BadRank,
    DimensionMismatch,
    LayoutMismatch,
    NonOrthonormalBasis,
    NotHermitian,
    NotNormalized,
    NotPSD,
    ParseError,
    QCorrError,
    UnknownLabel,
)

TRACE_TOL = 1e-10
JSON_TRACE_TOL = 1e-8


@dataclass(frozen=True)
class SubsystemLayout:
    """Ordered ``(label, dim)`` parts; the first part is the slowest tensor index."""

    parts: tuple[tuple[str, int], ...]

    def __post_init__(self):
        parts = tuple((str(lab), int(d)) for lab, d in self.parts)
        object.__setattr__(self, "parts", parts)
        labels = [lab for lab, _ in parts]
        if len(set(labels)) != len(labels):
            raise BadParameter(f"duplicate subsystem labels in {labels}")
        if any(d < 1 for _, d in parts):
            raise BadParameter("subsystem dimensions must be >= 1")

    @classmethod
    def of(cls, **dims: int) -> "SubsystemLayout":
        return cls(tuple(dims.items()))

    @classmethod
    def bipartite(cls, da: int, db: int) -> "SubsystemLayout":
        return cls((("a", da), ("b", db)))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.parts)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.parts)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabel(f"label {label!r} not in layout {self.labels}") from None

    def dim(self, label: str) -> int:
        return self.parts[self.index(label)][1]

    def sub(self, labels: Iterable[str]) -> "SubsystemLayout":
        wanted = set(labels)
        for lab in wanted:
            self.index(lab)
        return SubsystemLayout(tuple(p for p in self.parts if p[0] in wanted))

    def group_dim(self, labels: Iterable[str]) -> int:
        return int(np.prod([self.dim(lab) for lab in labels]))


def _as_layout(layout, dim: int) -> SubsystemLayout:
    if layout is None:
        return SubsystemLayout((("s", dim),))
    if isinstance(layout, SubsystemLayout):
        return layout
    return SubsystemLayout(tuple(layout))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    layout: SubsystemLayout
    mat: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = np.array(self.mat, dtype=complex)
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)
        if mat.shape != (self.layout.total, self.layout.total):
            raise DimensionMismatch(f"matrix shape {mat.shape} does not match layout {self.layout.dims}")
        if not np.all(np.isfinite(mat)):
            raise NotHermitian("density matrix has non-finite entries")
        linalg.check_hermitian(mat)
        tr = np.trace(mat).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise NotNormalized(f"trace {tr:.12f} differs from 1")
        wmin = np.linalg.eigvalsh(mat)[0]
        if wmin < -linalg.PSD_TOL:
            raise NotPSD(f"minimum eigenvalue {wmin:.3e}")

    @classmethod
    def from_array(cls, mat, layout=None, normalize: bool = False) -> "DensityMatrix":
        mat = np.asarray(mat, dtype=complex)
        mat = 0.5 * (mat + mat.conj().T)
        if normalize:
            mat = mat / np.trace(mat).real
        return cls(_as_layout(layout, mat.shape[0]), mat)

    @classmethod
    def from_pure(cls, psi, layout=None) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        return cls.from_array(np.outer(psi, psi.conj()), layout)

    @property
    def dim(self) -> int:
        return self.layout.total

    @property
    def dims(self) -> tuple[int, ...]:
        return self.layout.dims

    @property
    def labels(self) -> tuple[str, ...]:
        return self.layout.labels

    def partial_trace(self, keep: Iterable[str]) -> "DensityMatrix":
        return partial_trace(self, keep)

    def relabel(self, layout) -> "DensityMatrix":
        return DensityMatrix(_as_layout(layout, self.dim), self.mat)

    def reorder(self, labels: Sequence[str]) -> "DensityMatrix":
        perm = [self.layout.index(lab) for lab in labels]
        if sorted(perm) != list(range(len(self.layout.parts))):
            raise LayoutMismatch("reorder needs every label exactly once")
        new = SubsystemLayout(tuple(self.layout.parts[p] for p in perm))
        return DensityMatrix(new, linalg.permute_subsystems(self.mat, self.dims, perm))

    def bipartition(self, left: Sequence[str]) -> tuple[np.ndarray, int, int, list[str]]:
        """Matrix with ``left`` labels moved first (in layout order), plus group dims."""
        left_set = set(left)
        for lab in left_set:
            self.layout.index(lab)
        order = [lab for lab in self.labels if lab in left_set] + [lab for lab in self.labels if lab not in left_set]
        moved = self.reorder(order)
        da = self.layout.group_dim([lab for lab in order if lab in left_set])
        return moved.mat, da, self.dim // da, order

    def rank(self, cutoff: float = linalg.SUPPORT_CUTOFF) -> int:
        return int(np.sum(np.linalg.eigvalsh(self.mat) > cutoff))

    def is_pure(self, tol: float = 1e-10) -> bool:
        return abs(np.trace(self.mat @ self.mat).real - 1.0) <= tol

    def to_json(self) -> dict:
        return state_to_json(self)


def partial_trace(rho: DensityMatrix, keep: Iterable[str]) -> DensityMatrix:
    keep = list(keep)
    idx = [rho.layout.index(lab) for lab in keep]
    sub = rho.layout.sub(keep)
    red = linalg.partial_trace(rho.mat, rho.dims, idx)
    return DensityMatrix.from_array(red, sub)


def bipartite_layout(da: int, db: int) -> SubsystemLayout:
    return SubsystemLayout.bipartite(da, db)


@dataclass(frozen=True, eq=False)
class Ensemble:
    weights: np.ndarray
    members: tuple[DensityMatrix, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        _check_distribution(w)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "members", tuple(self.members))
        if len(self.members) != w.size:
            raise LayoutMismatch("number of weights and members differ")
        if len({m.layout for m in self.members}) > 1:
            raise LayoutMismatch("ensemble members must share one layout")

    def mixture(self) -> DensityMatrix:
        mat = sum(p * m.mat for p, m in zip(self.weights, self.members))
        return DensityMatrix.from_array(mat, self.members[0].layout)


@dataclass(frozen=True, eq=False)
class SeparableAnsatz:
    """``sum_i p_i rho_a^i (x) rho_b^i``; factors are ``DensityMatrix`` on single parties."""

    weights: np.ndarray
    left: tuple[DensityMatrix, ...]
    right: tuple[DensityMatrix, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        _check_distribution(w)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "left", tuple(self.left))
        object.__setattr__(self, "right", tuple(self.right))
        if not (len(self.left) == len(self.right) == w.size):
            raise LayoutMismatch("weights, left and right factors must have equal length")

    @property
    def terms(self) -> int:
        return self.weights.size

    @property
    def dims(self) -> tuple[int, int]:
        return self.left[0].dim, self.right[0].dim

    def assemble(self) -> DensityMatrix:
        return assemble_separable(self)


def _check_distribution(w: np.ndarray, tol: float = TRACE_TOL) -> None:
    if w.ndim == 0 or w.size == 0 or np.any(w < -tol) or abs(w.sum() - 1.0) > tol:
        raise BadDistribution(f"weights {np.round(w, 6).tolist()} are not a probability distribution")


def _as_state_matrix(x, dim: int | None = None) -> np.ndarray:
    if isinstance(x, DensityMatrix):
        return x.mat
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 1:
        arr = np.outer(arr, arr.conj()) / np.vdot(arr, arr).real
    if dim is not None and arr.shape != (dim, dim):
        raise DimensionMismatch(f"expected a {dim}x{dim} operator")
    return arr


def _as_basis(basis) -> np.ndarray:
    b = np.asarray(basis, dtype=complex)
    if b.ndim == 1:
        b = b[:, None]
    return b


def make_cq(weights, basis, conditionals, layout=None) -> DensityMatrix:
    """``sum_i p_i |i><i| (x) rho_b^i`` with ``basis`` columns orthonormal on the left party."""
    w = np.asarray(weights, dtype=float)
    _check_distribution(w)
    basis = _as_basis(basis)
    if basis.shape[1] < w.size:
        raise NonOrthonormalBasis("fewer basis vectors than weights")
    if not linalg.is_orthonormal(basis[:, : w.size]):
        raise NonOrthonormalBasis("classical basis is not orthonormal")
    conds = [_as_state_matrix(c) for c in conditionals]
    db = conds[0].shape[0]
    da = basis.shape[0]
    mat = sum(p * np.kron(np.outer(basis[:, i], basis[:, i].conj()), conds[i]) for i, p in enumerate(w))
    return DensityMatrix.from_array(mat, layout or bipartite_layout(da, db))


def make_cc(joint_weights, left_basis, right_basis, layout=None) -> DensityMatrix:
    """``sum_ij p_ij |i><i| (x) |j><j|``."""
    p = np.asarray(joint_weights, dtype=float)
    _check_distribution(p.reshape(-1))
    lb, rb = _as_basis(left_basis), _as_basis(right_basis)
    for b, n in ((lb, p.shape[0]), (rb, p.shape[1])):
        if b.shape[1] < n or not linalg.is_orthonormal(b[:, :n]):
            raise NonOrthonormalBasis("basis is not orthonormal")
    mat = np.zeros((lb.shape[0] * rb.shape[0],) * 2, dtype=complex)
    for i in range(p.shape[0]):
        for j in range(p.shape[1]):
            v = np.kron(lb[:, i], rb[:, j])
            mat += p[i, j] * np.outer(v, v.conj())
    return DensityMatrix.from_array(mat, layout or bipartite_layout(lb.shape[0], rb.shape[0]))


def assemble_separable(ansatz: SeparableAnsatz) -> DensityMatrix:
    da, db = ansatz.dims
    mat = sum(p * np.kron(a.mat, b.mat) for p, a, b in zip(ansatz.weights, ansatz.left, ansatz.right))
    return DensityMatrix.from_array(mat, bipartite_layout(da, db))


def embed_separable_to_cq(ansatz: SeparableAnsatz, ancilla_dim: int | None = None) -> DensityMatrix:
    """Lift a separable decomposition to a state on (a, a', b) that is CQ across aa':b.

    Each left factor is purified into its own block of a' so the purifications
    are mutually orthogonal; tracing a' returns the assembled separable state.
    """
    blocks = [linalg.purify(a.mat) for a in ansatz.left]
    need = sum(r for _, r in blocks)
    da, db = ansatz.dims
    if ancilla_dim is None:
        ancilla_dim = ansatz.terms * da
    if ancilla_dim < need:
        raise AncillaTooSmall(f"a' needs dimension >= {need} for {ansatz.terms} orthogonal purifications")
    mat = np.zeros((da * ancilla_dim * db,) * 2, dtype=complex)
    offset = 0
    for p, (vec, r), b in zip(ansatz.weights, blocks, ansatz.right):
        alpha = np.zeros((da, ancilla_dim), dtype=complex)
        alpha[:, offset : offset + r] = vec.reshape(da, r)
        offset += r
        a_vec = alpha.reshape(-1)
        mat += p * np.kron(np.outer(a_vec, a_vec.conj()), b.mat)
    layout = SubsystemLayout((("a", da), ("a'", ancilla_dim), ("b", db)))
    return DensityMatrix.from_array(mat, layout)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_density(dim: int, rank: int | None = None, seed=None, layout=None) -> DensityMatrix:
    """Ginibre-induced state ``G G^dagger / tr`` with ``G`` a dim x rank complex normal matrix."""
    rank = dim if rank is None else int(rank)
    if not 1 <= rank <= dim:
        raise BadRank(f"rank must be in [1, {dim}], got {rank}")
    rng = _rng(seed)
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    mat = g @ g.conj().T
    return DensityMatrix.from_array(mat / np.trace(mat).real, layout)


def random_pure(dims: Sequence[int], seed=None) -> np.ndarray:
    rng = _rng(seed)
    d = int(np.prod(dims))
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def bell() -> np.ndarray:
    return np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)


def max_entangled(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)


def pure_state(psi, da: int, db: int) -> DensityMatrix:
    return DensityMatrix.from_pure(psi, bipartite_layout(da, db))


def werner(p: float) -> DensityMatrix:
    """``p |Phi+><Phi+| + (1 - p) I/4``."""
    if not 0.0 <= p <= 1.0:
        raise BadParameter(f"werner parameter must lie in [0, 1], got {p}")
    phi = bell()
    mat = p * np.outer(phi, phi.conj()) + (1 - p) * np.eye(4) / 4
    return DensityMatrix.from_array(mat, bipartite_layout(2, 2))


def maximally_mixed(layout: SubsystemLayout) -> DensityMatrix:
    return DensityMatrix(layout, np.eye(layout.total) / layout.total)


def product(*states: DensityMatrix) -> DensityMatrix:
    parts = tuple(p for s in states for p in s.layout.parts)
    return DensityMatrix.from_array(linalg.tensor(*[s.mat for s in states]), SubsystemLayout(parts))


def random_channel(dim: int, kraus: int = 2, seed=None, out_dim: int | None = None) -> list[np.ndarray]:
    """Kraus operators of a random channel, cut from a Haar-like isometry."""
    out_dim = dim if out_dim is None else int(out_dim)
    rng = _rng(seed)
    g = rng.standard_normal((kraus * out_dim, dim)) + 1j * rng.standard_normal((kraus * out_dim, dim))
    q, _ = np.linalg.qr(g)
    return [q[k * out_dim:(k + 1) * out_dim] for k in range(kraus)]


def apply_local_channel(rho: DensityMatrix, kraus: Sequence[np.ndarray], label: str) -> DensityMatrix:
    """``(id (x) Phi)(rho)`` with ``Phi`` acting on subsystem ``label`` (dimension preserving)."""
    dims = rho.dims
    i = rho.layout.index(label)
    out = np.zeros_like(rho.mat)
    for k in kraus:
        if k.shape != (dims[i], dims[i]):
            raise DimensionMismatch(f"Kraus operator shape {k.shape} does not act on {label} of dim {dims[i]}")
        ops = [np.eye(d) for d in dims]
        ops[i] = k
        full = linalg.tensor(*ops)
        out += full @ rho.mat @ full.conj().T
    return DensityMatrix.from_array(out, rho.layout)


def ppt_min_eigenvalue(rho: DensityMatrix, label: str | None = None) -> float:
    """Smallest eigenvalue of the partial transpose on ``label`` (last party by default)."""
    sys = len(rho.dims) - 1 if label is None else rho.layout.index(label)
    pt = linalg.partial_transpose(rho.mat, rho.dims, sys)
    return float(np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))[0])


def is_ppt(rho: DensityMatrix, tol: float = 1e-10) -> bool:
    return ppt_min_eigenvalue(rho) >= -tol


def _classical_basis(mat: np.ndarray, da: int, db: int) -> np.ndarray:
    """Candidate classical basis on the left factor of a (da, db) operator.

    A state is CQ iff the operators ``<beta|rho|gamma>`` on the left factor form a
    commuting normal family; a generic real combination of their Hermitian
    parts then has an eigenbasis diagonalizing all of them.
    """
    t = mat.reshape(da, db, da, db)
    blocks = t.transpose(1, 3, 0, 2).reshape(db * db, da, da)
    rng = np.random.default_rng(1234567)
    herm = 0.5 * (blocks + np.conj(blocks.transpose(0, 2, 1)))
    anti = 0.5j * (np.conj(blocks.transpose(0, 2, 1)) - blocks)
    c1 = rng.standard_normal(db * db)
    c2 = rng.standard_normal(db * db)
    h = np.tensordot(c1, herm, 1) + np.tensordot(c2, anti, 1)
    _, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return v


def _pinch_left(mat: np.ndarray, basis: np.ndarray, da: int, db: int) -> np.ndarray:
    t = mat.reshape(da, db, da, db)
    rot = np.einsum("xi,xbyc,yi->ibc", basis.conj(), t, basis)
    out = np.einsum("xi,ibc,yi->xbyc", basis, rot, basis.conj())
    return out.reshape(da * db, da * db)


def classical_basis(rho: DensityMatrix, cut: Sequence[str] = ("a",)) -> np.ndarray:
    mat, da, db, _ = rho.bipartition(cut)
    return _classical_basis(mat, da, db)


def is_cq(rho: DensityMatrix, cut: Sequence[str] = ("a",), tol: float = 1e-8) -> bool:
    """True iff some orthonormal basis on ``cut`` leaves ``rho`` invariant under pinching."""
    mat, da, db, _ = rho.bipartition(cut)
    basis = _classical_basis(mat, da, db)
    return bool(np.linalg.norm(_pinch_left(mat, basis, da, db) - mat) <= tol)


def is_cc(rho: DensityMatrix, tol: float = 1e-8, cut: Sequence[str] | None = None) -> bool:
    if cut is None:
        cut = (rho.labels[0],)
    other = [lab for lab in rho.labels if lab not in set(cut)]
    return is_cq(rho, cut, tol) and is_cq(rho, other, tol)


# JSON state format ---------------------------------------------------------


def state_to_json(rho: DensityMatrix) -> dict:
    return {
        "dims": list(rho.dims),
        "labels": list(rho.labels),
        "re": rho.mat.real.reshape(-1).tolist(),
        "im": rho.mat.imag.reshape(-1).tolist(),
    }


def state_from_json(obj: dict) -> DensityMatrix:
    try:
        dims = [int(d) for d in obj["dims"]]
        labels = [str(x) for x in obj.get("labels") or _default_labels(len(dims))]
        re = np.asarray(obj["re"], dtype=float).reshape(-1)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float).reshape(-1)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed state object: {exc}") from exc
    if len(labels) != len(dims):
        raise ParseError("labels and dims differ in length")
    d = int(np.prod(dims))
    if re.size != d * d or im.size != d * d:
        raise ParseError(f"expected {d * d} entries for dims {dims}")
    mat = (re + 1j * im).reshape(d, d)
    tr = np.trace(mat).real
    if abs(tr - 1.0) > JSON_TRACE_TOL:
        raise ParseError(f"state trace {tr:.10f} differs from 1")
    if abs(tr - 1.0) > TRACE_TOL:
        mat = mat / tr
    try:
        return DensityMatrix.from_array(mat, SubsystemLayout(tuple(zip(labels, dims))))
    except QCorrError as exc:
        raise ParseError(f"invalid density matrix: {exc}") from exc


def _default_labels(n: int) -> list[str]:
    return ["a", "b"] if n == 2 else [f"s{i}" for i in range(n)]


def load_state(path) -> DensityMatrix:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read state file {path}: {exc}") from exc
    return state_from_json(obj)


def save_state(rho: DensityMatrix, path) -> None:
    Path(path).write_text(json.dumps(state_to_json(rho)))
