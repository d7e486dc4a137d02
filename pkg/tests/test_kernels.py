import numpy as np
import pytest

import oracles
from fdcheck import crandn, directional_gap
from qcorr import kernels

TOL = 1e-5


def _state(a):
    m = a @ a.conj().T
    return m / np.trace(m).real


@pytest.mark.parametrize("seed", range(4))
def test_fidelity_factors_value_and_gradient(seed):
    rng = np.random.default_rng(seed)
    a, w = crandn(rng, (4, 3)), crandn(rng, (4, 2))
    f, ga, gw = kernels.fidelity_factors(a, w)
    assert abs(f - oracles.fidelity(_state(a), _state(w))) < 1e-6
    assert directional_gap(lambda x, y: kernels.fidelity_factors(x, y)[0], [a, w], [ga, gw], rng) < TOL


@pytest.mark.parametrize("seed", range(4))
def test_relent_factors_value_and_gradient(seed):
    rng = np.random.default_rng(seed)
    a, w = crandn(rng, (4, 2)), crandn(rng, (4, 4))
    s, ga, gw = kernels.relent_factors(a, w)
    rho, sigma = _state(a), _state(w)
    ref = float(np.real(np.trace(rho @ (_log2_supported(rho) - _log2_supported(sigma)))))
    assert abs(s - ref) < 1e-8
    assert directional_gap(lambda x, y: kernels.relent_factors(x, y)[0], [a, w], [ga, gw], rng) < TOL


def _log2_supported(m):
    w, v = np.linalg.eigh(m)
    lw = np.where(w > 1e-12, np.log2(np.clip(w, 1e-300, None)), 0.0)
    return (v * lw) @ v.conj().T


def test_relent_factors_support_failure(rng):
    a = crandn(rng, (4, 4))
    w = crandn(rng, (4, 2))
    assert kernels.relent_factors(a, w)[0] == np.inf


def test_entropy_factor_gradient(rng):
    a = crandn(rng, (4, 3))
    a = a / np.linalg.norm(a)
    val, g = kernels.entropy_factor(a)
    assert abs(val - oracles.entropy(a @ a.conj().T)) < 1e-10
    assert directional_gap(lambda x: kernels.entropy_factor(x)[0], [a], [g], rng) < TOL


def _linear_case(rng, fn, pull, args):
    c = crandn(rng, fn(*args).shape)
    grads = pull(*args, c)
    score = lambda *xs: float(np.real(np.sum(np.conj(c) * fn(*xs))))
    return directional_gap(score, list(args), list(grads), rng)


def test_sep_factor_builds_product_mixture(rng):
    left, right = crandn(rng, (3, 2)), crandn(rng, (3, 3))
    w = kernels.sep_factor(left, right)
    direct = sum(np.outer(np.kron(left[k], right[k]), np.kron(left[k], right[k]).conj()) for k in range(3))
    assert np.allclose(w @ w.conj().T, direct)
    assert _linear_case(rng, kernels.sep_factor, kernels.sep_pullback, (left, right)) < TOL


def test_cq_factor(rng):
    u, blocks = oracles.random_unitary(rng, 2), crandn(rng, (2, 3, 2))
    w = kernels.cq_factor(u, blocks)
    direct = sum(np.kron(np.outer(u[:, i], u[:, i].conj()), blocks[i] @ blocks[i].conj().T) for i in range(2))
    assert np.allclose(w @ w.conj().T, direct)
    assert _linear_case(rng, kernels.cq_factor, kernels.cq_pullback, (u, blocks)) < TOL


def test_pinch_factor(rng):
    a, u = crandn(rng, (6, 2)), oracles.random_unitary(rng, 2)
    w = kernels.pinch_factor(a, u, 2)
    rho = a @ a.conj().T
    proj = [np.kron(np.outer(u[:, i], u[:, i].conj()), np.eye(3)) for i in range(2)]
    assert np.allclose(w @ w.conj().T, sum(p @ rho @ p for p in proj))
    fn = lambda x, y: kernels.pinch_factor(x, y, 2)
    pull = lambda x, y, g: kernels.pinch_pullback(x, y, 2, g)
    assert _linear_case(rng, fn, pull, (a, u)) < TOL


def test_ptrace_factor(rng):
    w = crandn(rng, (12, 2))
    dims, traced = [2, 3, 2], [1]
    f = kernels.ptrace_factor(w, dims, traced)
    assert np.allclose(f @ f.conj().T, oracles.partial_trace(w @ w.conj().T, dims, [0, 2]))
    c = crandn(rng, f.shape)
    g = kernels.ptrace_pullback(dims, traced, 2, c)
    score = lambda x: float(np.real(np.sum(np.conj(c) * kernels.ptrace_factor(x, dims, traced))))
    assert directional_gap(score, [w], [g], rng) < TOL


@pytest.mark.parametrize("anc", [(2,), (2, 3)])
def test_extension_factor(rng, anc):
    psi0 = crandn(rng, (2, 2, 3))
    cols = int(np.prod(anc)) * 2
    v = crandn(rng, (cols, 3))
    w = kernels.extension_factor(psi0, v, anc)
    c = crandn(rng, w.shape)
    g = kernels.extension_pullback(psi0, anc, c)
    score = lambda x: float(np.real(np.sum(np.conj(c) * kernels.extension_factor(psi0, x, anc))))
    assert directional_gap(score, [v], [g], rng) < TOL


def test_extension_of_isometry_recovers_marginal(rng):
    psi = crandn(rng, (2, 2, 3))
    psi = psi / np.linalg.norm(psi)
    v, _ = np.linalg.qr(crandn(rng, (6, 3)))
    w = kernels.extension_factor(psi, v, (2,))
    marginal = oracles.partial_trace(w @ w.conj().T, [2, 2, 2], [0, 2])
    rho = psi.reshape(4, 3) @ psi.reshape(4, 3).conj().T
    assert np.allclose(marginal, rho)


def test_pinched_entropy_gradients(rng):
    a = crandn(rng, (4, 4))
    rho = a @ a.conj().T
    rho = rho / np.trace(rho).real
    u = oracles.random_unitary(rng, 2)
    val, k, gu = kernels.pinched_entropy(rho, u, 2)
    proj = [np.kron(np.outer(u[:, i], u[:, i].conj()), np.eye(2)) for i in range(2)]
    assert abs(val - oracles.entropy(sum(p @ rho @ p for p in proj))) < 1e-10
    dh = crandn(rng, (4, 4))
    dh = dh + dh.conj().T
    step = 1e-6
    num = (kernels.pinched_entropy(rho + step * dh, u, 2)[0] - kernels.pinched_entropy(rho - step * dh, u, 2)[0]) / (2 * step)
    assert abs(num - np.real(np.trace(k @ dh))) < 1e-5
    gap = directional_gap(lambda y: kernels.pinched_entropy(rho, y, 2)[0], [u], [gu], rng)
    assert gap < TOL
