import numpy as np
import pytest

import oracles
from qcorr import optimize, states
from qcorr.errors import BadParameter, NonFinite
from qcorr.optimize import MeasureReport, OptimizerConfig, Problem
from qcorr.parametrize import ComplexBlock, ParamSpace

BELL_BURES = 2 - np.sqrt(2)


def test_config_roundtrip_and_replace():
    cfg = OptimizerConfig(restarts=3, seed=7, dims_schedule=[(1, 1), [2, 2]])
    assert cfg.dims_schedule == ((1, 1), (2, 2))
    again = OptimizerConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert cfg.replace(seed=8).seed == 8


@pytest.mark.parametrize("bad", [{"restarts": 0}, {"max_iters": 0}, {"step_tol": 0.0}, {"value_tol": -1.0}])
def test_config_validation(bad):
    with pytest.raises(BadParameter):
        OptimizerConfig(**bad)


def test_config_rejects_unknown_keys():
    with pytest.raises(BadParameter):
        OptimizerConfig.from_dict({"restart": 3})


def test_restart_streams_are_deterministic_and_distinct():
    a = optimize.restart_rng(5, optimize.stream_salt("x"), 0).standard_normal(4)
    b = optimize.restart_rng(5, optimize.stream_salt("x"), 0).standard_normal(4)
    c = optimize.restart_rng(5, optimize.stream_salt("x"), 1).standard_normal(4)
    d = optimize.restart_rng(5, optimize.stream_salt("y"), 0).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c) and not np.allclose(a, d)


def test_nan_objective_raises():
    prob = Problem(ParamSpace({"z": ComplexBlock((1,))}), lambda vals: (float("nan"), None))
    with pytest.raises(NonFinite):
        prob.value_and_grad(np.zeros(2))


def test_infinite_objective_is_penalized_not_fatal():
    def fun(vals):
        z = vals["z"][0]
        return (np.inf if z.real > 1 else abs(z - 0.5) ** 2), None

    prob = Problem(ParamSpace({"z": ComplexBlock((1,))}), fun, 0.0)
    x, val, diag = optimize.run_multistart(prob, OptimizerConfig(restarts=3), 1)
    assert val < 1e-8
    assert diag["restarts_used"] >= 1


def test_lower_bound_stops_early():
    prob = Problem(ParamSpace({"z": ComplexBlock((2,))}), lambda v: (float(np.sum(np.abs(v["z"]) ** 2)), {"z": 2 * v["z"]}), 0.0)
    _, val, diag = optimize.run_multistart(prob, OptimizerConfig(restarts=10), 3)
    assert val < 1e-9 and diag["restarts_used"] == 1


def test_minimize_over_unitaries_finds_basis_alignment(rng):
    target = oracles.random_unitary(rng, 2)
    p0 = np.outer(target[:, 0], target[:, 0].conj())

    def obj(u):
        return 1.0 - float(np.real(u[:, 0].conj() @ p0 @ u[:, 0]))

    rep = optimize.minimize_over_unitaries(obj, 2, OptimizerConfig(restarts=4), lower_bound=0.0)
    assert isinstance(rep, MeasureReport)
    assert rep.value < 1e-8


def test_minimize_over_simplex_with_gradient():
    c = np.array([0.3, -0.2, 0.5])
    rep = optimize.minimize_over_simplex(lambda p: float(c @ p), 3, OptimizerConfig(restarts=3),
                                         gradient=lambda p: c)
    assert rep.value == pytest.approx(-0.2, abs=1e-7)
    assert np.argmax(rep.certificate["weights"]) == 1


def test_closest_cq_bell(fast):
    rep = optimize.closest_cq(states.DensityMatrix.from_pure(states.bell(), states.bipartite_layout(2, 2)),
                              config=fast)
    assert rep.value == pytest.approx(BELL_BURES, abs=1e-6)
    sigma = rep.certificate["state"]
    assert states.is_cq(sigma)


def test_closest_cc_bell(fast):
    bell = states.DensityMatrix.from_pure(states.bell(), states.bipartite_layout(2, 2))
    rep = optimize.closest_cc(bell, config=fast)
    assert rep.value == pytest.approx(BELL_BURES, abs=1e-6)
    assert states.is_cc(rep.certificate["state"])
    assert np.isclose(rep.certificate["weights"].sum(), 1.0)


@pytest.mark.parametrize("seed", range(3))
def test_closest_separable_matches_concurrence_oracle(seed, fast):
    rng = np.random.default_rng(seed)
    mat = oracles.random_state(rng, 4, 2)
    rho = states.DensityMatrix.from_array(mat, states.bipartite_layout(2, 2))
    rep = optimize.closest_separable(rho, config=fast)
    assert rep.value == pytest.approx(oracles.two_qubit_bures_entanglement(mat), abs=1e-5)
    sigma = rep.certificate["state"].mat
    assert oracles.ppt_min_eig(sigma) > -1e-9
    rebuilt = states.assemble_separable(rep.certificate["ansatz"]).mat
    assert np.allclose(rebuilt, sigma, atol=1e-9)


def test_closest_set_searches_are_deterministic(fast):
    rho = states.random_density(4, seed=11, layout=states.bipartite_layout(2, 2))
    a = optimize.closest_cq(rho, config=fast)
    b = optimize.closest_cq(rho, config=fast)
    assert a.value == b.value
    assert np.array_equal(a.certificate["params"], b.certificate["params"])


def test_unknown_distance_and_terms():
    rho = states.werner(0.5)
    with pytest.raises(BadParameter):
        optimize.closest_cq(rho, distance="trace")
    with pytest.raises(BadParameter):
        optimize.closest_separable(rho, terms=0)
