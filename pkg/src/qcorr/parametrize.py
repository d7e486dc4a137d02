"""Real-vector parameterizations of the matrix manifolds searched by the optimizers.

Gradient convention: for a real function ``f`` of a complex array ``Z`` the
gradient is ``G = df/dRe(Z) + i df/dIm(Z)``, so that ``df = Re sum(conj(G) * dZ)``.
Every block maps a slice of the parameter vector to a value and pulls such a
gradient back to the slice.
"""
from __future__ import annotations

from typing import Any

import numpy as np
from scipy.linalg import schur

from .errors import BadLength, BadParameter


class Block:
    size: int = 0

    def decode(self, x: np.ndarray) -> tuple[Any, Any]:
        """Return ``(value, cache)``; the cache is handed back to ``pullback``."""
        raise NotImplementedError

    def pullback(self, x: np.ndarray, cache: Any, grad: Any) -> np.ndarray:
        raise NotImplementedError

    def random(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(self.size)

    def encode(self, value) -> np.ndarray:
        raise NotImplementedError


class ComplexBlock(Block):
    """Unconstrained complex array of a fixed shape."""

    def __init__(self, shape):
        self.shape = tuple(int(s) for s in shape)
        self.n = int(np.prod(self.shape))
        self.size = 2 * self.n

    def decode(self, x):
        return (x[: self.n] + 1j * x[self.n :]).reshape(self.shape), None

    def pullback(self, x, cache, grad):
        g = np.asarray(grad).reshape(-1)
        return np.concatenate([g.real, g.imag])

    def encode(self, value):
        v = np.asarray(value, dtype=complex).reshape(-1)
        return np.concatenate([v.real, v.imag])


def _hermitian_from_reals(x: np.ndarray, d: int) -> np.ndarray:
    h = np.zeros((d, d), dtype=complex)
    iu = np.triu_indices(d, 1)
    m = len(iu[0])
    h[np.diag_indices(d)] = x[:d]
    h[iu] = x[d : d + m] + 1j * x[d + m :]
    h = h + np.triu(h, 1).conj().T
    return h


class UnitaryBlock(Block):
    """``U = exp(iH)`` with ``H`` Hermitian built from ``d**2`` reals."""

    def __init__(self, d: int):
        self.d = int(d)
        self.size = self.d * self.d

    def decode(self, x):
        h = _hermitian_from_reals(x, self.d)
        w, q = np.linalg.eigh(h)
        u = (q * np.exp(1j * w)) @ q.conj().T
        return u, (w, q)

    def pullback(self, x, cache, grad):
        w, q = cache
        d = self.d
        phi = np.exp(0.5j * (w[:, None] + w[None, :])) * np.sinc((w[:, None] - w[None, :]) / (2 * np.pi))
        g_rot = q.conj().T @ grad @ q
        k = q @ (-1j * np.conj(phi) * g_rot) @ q.conj().T
        iu = np.triu_indices(d, 1)
        out = np.empty(self.size)
        out[:d] = np.real(np.diag(k))
        kl = k[iu]
        kt = k.T[iu]
        m = len(iu[0])
        out[d : d + m] = np.real(kl + kt)
        out[d + m :] = np.imag(kl) - np.imag(kt)
        return out

    def encode(self, value):
        """Reals whose decoding reproduces the unitary ``value`` (via its principal logarithm)."""
        u = np.asarray(value, dtype=complex)
        t, z = schur(u, output="complex")
        h = (z * np.angle(np.diag(t))) @ z.conj().T
        h = 0.5 * (h + h.conj().T)
        d = self.d
        iu = np.triu_indices(d, 1)
        return np.concatenate([np.real(np.diag(h)), h[iu].real, h[iu].imag])


class IsometryBlock(Block):
    """Isometry ``V = Z (Z^dagger Z)^(-1/2)`` from an unconstrained complex ``rows x cols`` matrix."""

    def __init__(self, rows: int, cols: int):
        if cols > rows:
            raise BadLength(f"an isometry needs rows >= cols, got {rows}x{cols}")
        self.rows, self.cols = int(rows), int(cols)
        self.base = ComplexBlock((rows, cols))
        self.size = self.base.size

    def decode(self, x):
        z, _ = self.base.decode(x)
        a, q = np.linalg.eigh(z.conj().T @ z)
        a = np.clip(a, 1e-300, None)
        s = (q / np.sqrt(a)) @ q.conj().T
        return z @ s, (z, s, a, q)

    def pullback(self, x, cache, grad):
        z, s, a, q = cache
        ra = np.sqrt(a)
        gamma = -1.0 / (ra[:, None] * ra[None, :] * (ra[:, None] + ra[None, :]))
        y = z.conj().T @ grad
        n = q @ (gamma * (q.conj().T @ y @ q)) @ q.conj().T
        gz = grad @ s + z @ (n + n.conj().T)
        return self.base.pullback(x, None, gz)

    def encode(self, value):
        return self.base.encode(value)


class SimplexBlock(Block):
    """Probability vector ``p = x**2 / sum(x**2)``."""

    def __init__(self, k: int):
        if k < 1:
            raise BadParameter("simplex dimension must be >= 1")
        self.size = int(k)

    def decode(self, x):
        s = float(np.dot(x, x))
        if s == 0.0:
            return np.full(self.size, 1.0 / self.size), s
        return x * x / s, s

    def pullback(self, x, cache, grad):
        s = cache
        if s == 0.0:
            return np.zeros(self.size)
        p = x * x / s
        g = np.asarray(grad, dtype=float)
        return 2.0 * x * (g - np.dot(p, g)) / s

    def encode(self, value):
        return np.sqrt(np.clip(np.asarray(value, dtype=float), 0.0, None))


class ParamSpace:
    """Ordered named blocks sharing one flat parameter vector."""

    def __init__(self, blocks: dict[str, Block]):
        self.blocks = dict(blocks)
        self.slices = {}
        start = 0
        for name, b in self.blocks.items():
            self.slices[name] = slice(start, start + b.size)
            start += b.size
        self.size = start

    def decode(self, x: np.ndarray) -> tuple[dict, dict]:
        vals, caches = {}, {}
        for name, b in self.blocks.items():
            vals[name], caches[name] = b.decode(x[self.slices[name]])
        return vals, caches

    def values(self, x: np.ndarray) -> dict:
        return self.decode(x)[0]

    def pullback(self, x: np.ndarray, caches: dict, grads: dict) -> np.ndarray:
        out = np.zeros(self.size)
        for name, g in grads.items():
            sl = self.slices[name]
            out[sl] = self.blocks[name].pullback(x[sl], caches[name], g)
        return out

    def random(self, rng: np.random.Generator) -> np.ndarray:
        return np.concatenate([b.random(rng) for b in self.blocks.values()]) if self.blocks else np.zeros(0)

    def encode(self, values: dict) -> np.ndarray:
        return np.concatenate([self.blocks[name].encode(values[name]) for name in self.blocks])

    def block_indices(self, names) -> np.ndarray:
        return np.concatenate([np.arange(self.slices[n].start, self.slices[n].stop) for n in names])
