import numpy as np
import pytest

import oracles
from qcorr import measures, states
from qcorr.errors import BadLength, BadParameter
from qcorr.measures import Side

LAYOUT = states.bipartite_layout(2, 2)


def _bell():
    return states.DensityMatrix.from_pure(states.bell(), LAYOUT)


def test_side_parsing():
    assert measures.as_side("LEFT") is Side.LEFT
    assert measures.as_side(Side.BOTH) is Side.BOTH
    with pytest.raises(BadParameter):
        measures.as_side("right")


def test_pure_bures_entanglement_schmidt_form(rng):
    psi = states.random_pure([2, 3], seed=rng)
    val, closest = measures.pure_bures_entanglement(psi, (2, 3))
    assert val == pytest.approx(2 - 2 * np.sqrt(oracles.schmidt_top(psi, 2, 3)), abs=1e-12)
    assert abs(np.vdot(closest, psi)) ** 2 == pytest.approx(oracles.schmidt_top(psi, 2, 3), abs=1e-10)


def test_bell_values(fast):
    bell = _bell()
    assert measures.bures_discord(bell, config=fast).value == pytest.approx(2 - np.sqrt(2), abs=1e-6)
    assert measures.bures_discord(bell, Side.BOTH, config=fast).value == pytest.approx(2 - np.sqrt(2), abs=1e-6)
    assert measures.relent_discord(bell, config=fast).value == pytest.approx(1.0, abs=1e-6)
    assert measures.relent_discord(bell, Side.BOTH, config=fast).value == pytest.approx(1.0, abs=1e-6)


def test_classical_states_have_no_discord(fast):
    cc = states.make_cc(np.array([[0.4, 0.1], [0.2, 0.3]]), np.eye(2), np.eye(2))
    assert measures.bures_discord(cc, Side.BOTH, config=fast).value < 1e-7
    assert measures.relent_discord(cc, Side.BOTH, config=fast).value < 1e-7


@pytest.mark.parametrize("seed", range(3))
def test_relent_discord_two_forms_agree(seed, fast):
    rho = states.random_density(4, seed=seed, layout=LAYOUT)
    a = measures.relent_discord(rho, config=fast)
    b = measures.relent_discord_via_cq(rho, config=fast)
    assert a.value == pytest.approx(b.value, abs=1e-4)
    assert states.is_cq(a.certificate["state"])


@pytest.mark.parametrize("seed", range(3))
def test_convex_roof_matches_concurrence_oracle(seed, fast):
    rng = np.random.default_rng(seed)
    mat = oracles.random_state(rng, 4, 2)
    rho = states.DensityMatrix.from_array(mat, LAYOUT)
    rep = measures.convex_roof_bures(rho, config=fast)
    assert rep.value == pytest.approx(oracles.two_qubit_bures_entanglement(mat), abs=1e-5)
    ens = rep.certificate["ensemble"]
    rebuilt = sum(w * m.mat for w, m in zip(ens.weights, ens.members))
    assert np.allclose(rebuilt, mat, atol=1e-9)


def test_convex_roof_nonincreasing_in_length(fast):
    rho = states.random_density(4, rank=2, seed=4, layout=LAYOUT)
    vals = [measures.convex_roof_bures(rho, m, config=fast).value for m in (2, 3, 4)]
    assert vals[1] <= vals[0] + 1e-7 and vals[2] <= vals[1] + 1e-7


def test_convex_roof_rejects_short_decompositions():
    rho = states.random_density(4, rank=3, seed=1, layout=LAYOUT)
    with pytest.raises(BadLength):
        measures.convex_roof_bures(rho, 2)


@pytest.mark.parametrize("p", [0.2, 0.6, 0.9])
def test_werner_relent_entanglement(p, fast):
    rep = measures.relent_entanglement(states.werner(p), config=fast)
    assert rep.value == pytest.approx(oracles.werner_relent(p), abs=1e-4)


def test_entanglement_below_discord(fast):
    rho = states.random_density(4, seed=9, layout=LAYOUT)
    e = measures.bures_entanglement(rho, config=fast).value
    d = measures.bures_discord(rho, config=fast).value
    assert e <= d + 1e-7
