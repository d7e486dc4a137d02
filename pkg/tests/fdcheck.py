"""Directional finite-difference checks for the ``df = Re sum(conj(G) dZ)`` convention."""
import numpy as np


def crandn(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def directional_gap(f, args, grads, rng, step=1e-6, real=None):
    """Largest mismatch between analytic and central-difference derivatives along a random direction."""
    real = real or [False] * len(args)
    dirs = [rng.standard_normal(np.shape(a)) if r else crandn(rng, np.shape(a)) for a, r in zip(args, real)]
    plus = f(*[a + step * d for a, d in zip(args, dirs)])
    minus = f(*[a - step * d for a, d in zip(args, dirs)])
    numeric = (plus - minus) / (2 * step)
    analytic = sum(float(np.real(np.sum(np.conj(g) * d))) for g, d in zip(grads, dirs))
    return abs(numeric - analytic) / max(1.0, abs(analytic))
