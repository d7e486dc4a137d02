"""Exit criteria, each checked at its stated tolerance on the seeded suite corpora.

Every test prints one ``[PASS]``/``[FAIL]`` line; the lines are repeated in
the terminal summary. Independent oracles from ``oracles.py`` cross-check the
package's reference values where a closed form exists.
"""
import json
import time

import numpy as np
import pytest

import conftest
import oracles
from qcorr import cli, linalg, states, suites
from qcorr.optimize import OptimizerConfig

pytestmark = pytest.mark.acceptance

SEED = 0
CONFIG = OptimizerConfig(restarts=4, seed=SEED)


def report(capsys, number, title, ok, detail, seconds):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {detail} ({seconds:.1f}s)"
    conftest.ACCEPTANCE_LINES.append(line)
    with capsys.disabled():
        print("\n" + line)


def run(name, **kw):
    t0 = time.perf_counter()
    res = suites.run_suite(name, seed=SEED, config=CONFIG, **kw)
    return res, time.perf_counter() - t0


def worst(res, check):
    return max(c.gap for r in res.instances for c in r.checks if c.name == check)


def failing(res, check):
    return [r.index for r in res.instances for c in r.checks if c.name == check and not c.passed]


@pytest.fixture(scope="module")
def sandwich():
    return run("sandwich")


def test_pure_state_closed_form(capsys):
    res, secs = run("pure-state")
    for r in res.instances:
        dims = (2, 2) if r.index < 20 else (2, 3)
        psi = states.random_pure(dims, seed=suites.instance_rng(SEED, r.index))
        assert r.values["closed_form"] == pytest.approx(2 - 2 * np.sqrt(oracles.schmidt_top(psi, *dims)), abs=1e-12)
    gap = worst(res, "E_B vs closed form")
    ok = len(res.instances) == 30 and gap <= 5e-3
    report(capsys, 1, "pure-state E_B vs 2(1 - sqrt(lambda_1))", ok, f"worst gap {gap:.2e} <= 5e-3 on 20 2x2 + 10 2x3", secs)
    assert ok


def _sandwich_states():
    return [suites.mixed_state(suites.instance_rng(SEED, i), i) for i in range(20)]


def test_extension_equivalence(capsys, sandwich):
    res, secs = sandwich
    for r, rho in zip(res.instances, _sandwich_states()):
        assert r.values["E_B"] == pytest.approx(oracles.two_qubit_bures_entanglement(rho.mat), abs=5e-3)
    ranks = sorted({r.label for r in res.instances})
    gap = worst(res, "|Ehat_B - E_B|")
    ok = len(res.instances) == 20 and gap <= 5e-3
    report(capsys, 2, "|Ehat_B - E_B|", ok, f"worst gap {gap:.2e} <= 5e-3 over {ranks}", secs)
    assert ok


def test_sandwich(capsys, sandwich):
    res, secs = sandwich
    lo, hi = worst(res, "E_B <= Ehat_B"), worst(res, "Ehat_B <= E_B_cr")
    eq = worst(res, "|E_B - E_B_cr|")
    ok = lo <= 5e-3 and hi <= 5e-3 and eq <= 1e-2
    report(capsys, 3, "E_B <= Ehat_B <= E_B_cr and E_B = E_B_cr", ok,
           f"shortfalls {lo:.2e}, {hi:.2e} <= 5e-3; |E_B - E_B_cr| {eq:.2e} <= 1e-2; run shared with criterion 2",
           secs)
    assert ok


def test_relent_discord_forms(capsys):
    res, secs = run("discord-forms")
    gap = worst(res, "|CQ form - measurement form|")
    ok = len(res.instances) == 50 and gap <= 1e-4
    report(capsys, 4, "CQ-set relent vs measurement form", ok, f"worst gap {gap:.2e} <= 1e-4 on 50 states", secs)
    assert ok


def test_pinched_relent_entanglement(capsys):
    res, secs = run("pinched-relent")
    eq, lo = worst(res, "|E_r - Echeck'_r|"), worst(res, "Ehat_r >= E_r")
    bad = failing(res, "|E_r - Echeck'_r|")
    ok = eq <= 1e-3 and lo <= 1e-3
    report(capsys, 5, "|E_r - Echeck'_r| and Ehat_r >= E_r", ok,
           f"worst |E_r - Echeck'_r| {eq:.2e} <= 1e-3 (failing {bad}); Ehat shortfall {lo:.2e} <= 1e-3", secs)
    assert ok


def test_convexity(capsys):
    res, secs = run("convexity")
    bound = worst(res, "Ehat(mix) <= sum p Ehat")
    wit = worst(res, "witness <= sum p Ehat")
    ext = worst(res, "witness extends the mixture")
    cq = worst(res, "witness target is CQ")
    ok = len(res.instances) == 30 and bound <= 5e-3 and wit <= 5e-3 and ext <= 1e-9 and cq == 0.0
    report(capsys, 6, "convexity of Ehat_B with flag-extension witness", ok,
           f"bound shortfall {bound:.2e}, witness shortfall {wit:.2e} <= 5e-3; witness marginal error {ext:.1e}", secs)
    assert ok


def test_inequality_chains(capsys):
    one, s1 = run("one-sided-chain")
    two, s2 = run("two-sided-chain")
    gaps = {f"{res.name}/{name}": w["gap"] for res in (one, two) for name, w in res.worst_gaps().items()}
    name, gap = max(gaps.items(), key=lambda kv: kv[1])
    ok = len(one.instances) == len(two.instances) == 10 and gap <= 5e-3
    report(capsys, 7, "one- and two-sided inequality chains, both distances", ok,
           f"{len(gaps)} inequalities, worst shortfall {gap:.2e} ({name}) <= 5e-3", s1 + s2)
    assert ok


def test_discrimination_correspondence(capsys):
    res, secs = run("discrimination")
    for r in res.instances[:5]:
        psi = states.random_pure((2, 2), seed=suites.instance_rng(SEED, r.index))
        assert r.values["lambda_1"] == pytest.approx(oracles.schmidt_top(psi, 2, 2), abs=1e-12)
    gap, pure = worst(res, "|lhs - rhs|"), worst(res, "|lhs - lambda_1|")
    labels = [r.label for r in res.instances]
    ok = labels.count("pure") == 5 and len(labels) == 10 and gap <= 1e-2 and pure <= 5e-3
    report(capsys, 8, "F^2(rho, S) vs extension-induced vN discrimination", ok,
           f"worst |lhs - rhs| {gap:.2e} <= 1e-2; pure |lhs - lambda_1| {pure:.2e} <= 5e-3", secs)
    assert ok


def test_relent_decomposition_identity(capsys):
    res, secs = run("relent-decomposition")
    gap = worst(res, "|lhs - rhs|")
    ok = len(res.instances) == 100 and gap <= 1e-8
    report(capsys, 9, "relative entropy split across a pinching", ok, f"worst gap {gap:.2e} <= 1e-8 on 100 pairs", secs)
    assert ok


def test_werner_dial(capsys):
    res, secs = run("werner-dial")
    misses = []
    for r in res.instances:
        p = r.values["p"]
        rho = oracles.werner_matrix(p)
        assert (oracles.ppt_min_eig(rho) >= -1e-12) == bool(r.values["ppt"])
        if p <= 1 / 3 or p >= 0.45:
            for c in r.checks:
                if not c.passed:
                    misses.append(f"p={p:.2f} {c.name} (E_B oracle {oracles.two_qubit_bures_entanglement(rho):.4f})")
    grid = [r.values["p"] for r in res.instances]
    ok = np.allclose(np.diff(grid), 0.05) and len(grid) == 21 and not misses
    report(capsys, 10, "Werner faithfulness dial with PPT referee", ok,
           "all grid points within bounds" if not misses else "misses: " + "; ".join(misses), secs)
    assert ok


def test_manifest_replay_is_bit_exact(capsys, tmp_path):
    t0 = time.perf_counter()
    mismatched = []
    for name in suites.SUITES:
        prefix = tmp_path / name
        code = cli.main(["verify", name, "--size", "1", "--restarts", "4", "--seed", str(SEED), "--out", str(prefix)])
        assert code in (0, 1, 3)
        doc = json.loads(prefix.with_suffix(".json").read_text())
        manifest = cli.RunManifest.from_dict(doc["manifest"])
        if cli.replay_values(manifest) != cli.recorded_values(doc, "verify"):
            mismatched.append(name)
    capsys.readouterr()
    ok = not mismatched
    report(capsys, 11, "replaying every suite manifest", ok,
           f"{len(suites.SUITES)} suites replayed, mismatches: {mismatched or 'none'}", time.perf_counter() - t0)
    assert ok


def test_helstrom_cross_check(capsys):
    res, secs = run("helstrom")
    for r in res.instances:
        e = suites.random_two_state_ensemble(suites.instance_rng(SEED, r.index))
        ref = oracles.helstrom(e.priors[0], e.hypotheses[0].mat, e.hypotheses[1].mat)
        assert r.values["helstrom"] == pytest.approx(ref, abs=1e-12)
    gap = worst(res, "|vN - Helstrom|")
    ok = len(res.instances) == 20 and gap <= 1e-5
    report(capsys, 12, "vN search vs two-state closed form", ok, f"worst gap {gap:.2e} <= 1e-5 on 20 ensembles", secs)
    assert ok
