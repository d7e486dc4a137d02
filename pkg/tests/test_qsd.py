import numpy as np
import pytest

import oracles
from qcorr import extensions as X
from qcorr import qsd, states
from qcorr.errors import IncompleteBasis, LayoutMismatch, TooManyHypotheses, WrongArity
from qcorr.optimize import OptimizerConfig, numeric_gradient

LAYOUT = states.bipartite_layout(2, 2)
QUBIT = states.SubsystemLayout((("a", 2),))


def _qubit(vec):
    return states.DensityMatrix.from_pure(np.asarray(vec, dtype=complex), QUBIT)


def _pair(rng, d=2, p=None):
    p = rng.uniform(0.2, 0.8) if p is None else p
    lay = states.SubsystemLayout((("a", d),))
    hyps = [states.DensityMatrix.from_array(oracles.random_state(rng, d), lay) for _ in range(2)]
    return qsd.DiscriminationEnsemble([p, 1 - p], hyps)


def test_ensemble_validation():
    with pytest.raises(LayoutMismatch):
        qsd.DiscriminationEnsemble([0.5, 0.5], [_qubit([1, 0])])
    big = states.DensityMatrix.from_array(np.eye(3) / 3, states.SubsystemLayout((("a", 3),)))
    with pytest.raises(LayoutMismatch):
        qsd.DiscriminationEnsemble([0.5, 0.5], [_qubit([1, 0]), big])


def test_helstrom_known_pair():
    e = qsd.DiscriminationEnsemble([0.5, 0.5], [_qubit([1, 0]), _qubit([1, 1] / np.sqrt(2))])
    assert qsd.helstrom_two_state(e) == pytest.approx(0.5 + np.sqrt(2) / 4, abs=1e-12)
    assert np.allclose(e.mixture(), 0.5 * (e.hypotheses[0].mat + e.hypotheses[1].mat))


def test_helstrom_arity():
    e = qsd.DiscriminationEnsemble([1.0], [_qubit([1, 0])])
    with pytest.raises(WrongArity):
        qsd.helstrom_two_state(e)


@pytest.mark.parametrize("seed", range(6))
def test_projective_search_reaches_helstrom(seed, fast):
    rng = np.random.default_rng(seed)
    e = _pair(rng, d=2 + seed % 2)
    ref = oracles.helstrom(e.priors[0], e.hypotheses[0].mat, e.hypotheses[1].mat)
    rep = qsd.optimal_success_vn(e, fast)
    assert rep.value == pytest.approx(ref, abs=1e-8)
    u, assign = rep.certificate["unitary"], rep.certificate["assignment"]
    recomputed = sum(e.priors[assign[k]] * np.real(u[:, k].conj() @ e.hypotheses[assign[k]].mat @ u[:, k])
                     for k in range(e.dim))
    assert recomputed == pytest.approx(rep.value, abs=1e-12)


def test_orthogonal_states_are_perfectly_distinguishable(fast):
    lay = states.SubsystemLayout((("a", 3),))
    hyps = [states.DensityMatrix.from_pure(np.eye(3)[i], lay) for i in range(3)]
    rep = qsd.optimal_success_vn(qsd.DiscriminationEnsemble([0.2, 0.3, 0.5], hyps), fast)
    assert rep.value == pytest.approx(1.0, abs=1e-8)


def test_single_hypothesis_and_too_many():
    assert qsd.optimal_success_vn(qsd.DiscriminationEnsemble([1.0], [_qubit([1, 0])])).value == 1.0
    hyps = [_qubit([1, 0]), _qubit([0, 1]), _qubit([1, 1] / np.sqrt(2))]
    with pytest.raises(TooManyHypotheses):
        qsd.optimal_success_vn(qsd.DiscriminationEnsemble([0.3, 0.3, 0.4], hyps))


def test_ensemble_from_extension_averages_to_state():
    rho = states.random_density(4, rank=2, seed=3, layout=LAYOUT)
    ext = X.extend(rho, X.identity_params(2))
    basis = oracles.random_unitary(np.random.default_rng(1), 4)
    e = qsd.ensemble_from_extension(ext, basis)
    assert np.isclose(e.priors.sum(), 1.0)
    assert np.allclose(e.mixture(), ext.reorder(["a", "a'", "b"]).mat, atol=1e-10)
    with pytest.raises(IncompleteBasis):
        qsd.ensemble_from_extension(ext, np.eye(4)[:, :3])


@pytest.mark.parametrize("ancilla", [(1,), (2,)])
def test_extension_discrimination_gradient(ancilla):
    rng = np.random.default_rng(len(ancilla) + ancilla[0])
    setup = X.ExtensionSetup(states.random_density(4, rank=2, seed=5, layout=LAYOUT), ancilla)
    prob = qsd.extension_discrimination_problem(setup)
    x = prob.space.random(rng)
    _, g = prob.value_and_grad(x)
    num = numeric_gradient(prob.value, x)
    assert np.linalg.norm(g - num) <= 1e-5 * max(1.0, np.linalg.norm(num))


def test_fidelity_discrimination_bell(fast):
    bell = states.DensityMatrix.from_pure(states.bell(), LAYOUT)
    res = qsd.verify_corollary(bell, fast)
    assert res.lhs == pytest.approx(0.5, abs=1e-6)
    assert res.rhs == pytest.approx(0.5, abs=1e-6)
    assert abs(res.gap) < 1e-6


def test_fidelity_discrimination_certificate():
    mat = oracles.random_state(np.random.default_rng(2), 4, 2)
    rho = states.DensityMatrix.from_array(mat, LAYOUT)
    res = qsd.verify_corollary(rho, OptimizerConfig(restarts=4))
    f2 = (1 - oracles.two_qubit_bures_entanglement(mat) / 2) ** 2
    assert res.lhs == pytest.approx(f2, abs=1e-5)
    assert res.rhs == pytest.approx(res.lhs, abs=1e-2)
    cert = res.discrimination.certificate
    assert np.allclose(cert["extension"].partial_trace(["a", "b"]).mat, mat, atol=1e-8)
    w = cert["measurement"]
    assert np.allclose(w.conj().T @ w, np.eye(w.shape[0]), atol=1e-8)
    e = qsd.ensemble_from_extension(cert["extension"], cert["basis"])
    scores = np.array([[p * np.real(w[:, k].conj() @ h.mat @ w[:, k]) for k in range(w.shape[1])]
                       for p, h in zip(e.priors, e.hypotheses)])
    assert scores.max(axis=0).sum() == pytest.approx(res.rhs, abs=1e-8)


def test_fidelity_discrimination_requires_two_parties():
    rho = states.DensityMatrix.from_array(np.eye(2) / 2, QUBIT)
    with pytest.raises(LayoutMismatch):
        qsd.verify_corollary(rho)
