import re

import numpy as np
import pytest
from conftest import N, S, T

from vaccine_game import BASELINE, steady_state, trajectory
from vaccine_game.analysis import (
    THRESHOLD_CONSTANTS,
    blockchain_impact,
    compare_policies,
    crossing_r_drift,
    early_time,
    find_beta_crossing,
    monotone_direction,
    profit_gap,
    prop14_eta_threshold,
    proposition_suite,
    random_feasible_params,
    sign,
    sweep,
    symmetric_params,
    eta_arrow_check,
    monotonicity_violations,
)

SIGNS_T = {"q,b,a": "+", "A": "+", "omega,p": "+", "D(tau)": "-", "D(inf)": "+",
            "pi_G(tau)": "-", "pi_G(inf)": "+"}


@pytest.mark.parametrize("values,expected", [
    ([1, 2, 3], "increasing"), ([3, 2, 1], "decreasing"), ([1, 1, 1], "constant"),
    ([1, 3, 2], "mixed"), ([1, 2, 2 - 1e-15], "increasing"),
])
def test_monotone_direction(values, expected):
    assert monotone_direction(np.array(values, dtype=float)) == expected


def test_sign():
    assert sign(1e-3) == "+" and sign(-2) == "-" and sign(1e-16, 1.0) == "0"


def test_early_time_rule():
    ks = [-0.08090, -0.08894, -0.09553]
    assert early_time(BASELINE) == pytest.approx(min(0.1, abs(1 / (10 * min(ks)))), rel=1e-3)


def test_policy_sign_pattern():
    table = compare_policies(BASELINE, tau=0.1)
    assert table.sign_row(T) == SIGNS_T
    assert table.sign_row(S) == {k: {"+": "-", "-": "+"}[v] for k, v in SIGNS_T.items()}


def test_three_way_orderings():
    table = compare_policies(BASELINE, grid=np.linspace(0, 100, 201))
    assert all(table.orderings.values()), [k for k, v in table.orderings.items() if not v]
    v = table.values
    assert v[("manu-d", "p", "inf")] == pytest.approx(2.078, abs=1e-3)
    assert v[("none", "p", "inf")] == pytest.approx(2.795, abs=1e-3)
    assert v[("manu-q", "p", "inf")] == pytest.approx(3.965, abs=1e-3)
    assert v[("manu-q", "pi_G", "inf")] > v[("manu-d", "pi_G", "inf")] > v[("none", "pi_G", "inf")]


def test_ranking_flips_across_crossing():
    res = find_beta_crossing(0.3, 0.1)
    below = profit_gap(symmetric_params(0.3, 0.1, res.bracket[0] * 0.9, 1e5, 1e-6), "government")
    above = profit_gap(symmetric_params(0.3, 0.1, res.crossing * 2, 1e5, 1e-6), "government")
    assert below < 0 < above
    p = symmetric_params(0.3, 0.1, 2 * res.analytic, 1e5, 1e-6)
    assert steady_state(S, p).pi_G > steady_state(T, p).pi_G


@pytest.mark.parametrize("target,expected", [("government", 9.4016), ("manufacturer", 6.1430)])
def test_threshold_examples(target, expected):
    res = find_beta_crossing(0.3, 0.1, target=target)
    assert res.crossing == pytest.approx(expected, rel=1e-2)
    assert res.analytic == pytest.approx(THRESHOLD_CONSTANTS[target] * 9)
    assert res.bracket[1] - res.bracket[0] <= 1e-6 and res.iterations <= 80


def test_threshold_deterministic():
    a = find_beta_crossing(0.2, 0.05, target="manufacturer")
    b = find_beta_crossing(0.2, 0.05, target="manufacturer")
    assert a.bracket == b.bracket and a.crossing == b.crossing


def test_threshold_r_drift():
    _, drift = crossing_r_drift(0.3, 0.1)
    assert drift < 1e-3


def test_threshold_no_sign_change():
    with pytest.raises(ValueError, match="no sign change"):
        find_beta_crossing(0.3, 0.1, bracket=(20.0, 30.0))
    with pytest.raises(ValueError):
        find_beta_crossing(0.3, 0.1, target="retailer")


def test_eta_sweep_arrows():
    res = sweep(BASELINE, "eta", np.linspace(4, 10, 13))
    assert not res.skipped
    checks = eta_arrow_check(res, BASELINE)
    assert all(c.ok for c in checks), [(c.policy, c.quantity, c.observed) for c in checks if not c.ok]
    pre = [c for c in checks if c.precondition]
    assert pre and all(c.precondition_holds for c in pre)


def test_alpha_sweep_no_subsidy():
    res = sweep(BASELINE, "alpha", np.linspace(9, 36, 10), policies=[N])
    for qty in ("q", "b", "a", "Q", "G", "D", "omega", "p"):
        assert res.verdict(N, qty) == "increasing", qty


def test_sweep_skips_infeasible_points():
    res = sweep(BASELINE, "eta", [1.0, 2.5, 7.0])
    skipped = {(v, pol) for v, pol, _ in res.skipped}
    assert (1.0, "manu-q") in skipped and (1.0, "manu-d") in skipped and (2.5, "manu-d") in skipped
    assert (2.5, "manu-q") not in skipped
    assert np.isnan(res.series(S, "p")[0]) and not np.isnan(res.series(N, "p")[0])


def test_sweep_parallel_matches_serial():
    grid = np.linspace(4, 10, 9)
    a = sweep(BASELINE, "eta", grid)
    b = sweep(BASELINE, "eta", grid, workers=4)
    for pol in a.policies:
        assert a.steady[pol] == b.steady[pol] and a.initial[pol] == b.initial[pol]


def test_sweep_validation():
    with pytest.raises(ValueError):
        sweep(BASELINE, "kappa", [1, 2])
    with pytest.raises(ValueError):
        sweep(BASELINE, "eta", [2, 1])


def test_blockchain_effect():
    grid = np.linspace(0, 100, 1001)
    rep = blockchain_impact(BASELINE, grid, theta2_values=[0.3, 0.5, 0.7])
    assert all(rep.larger.values()), rep.larger
    assert rep.crossover_time is not None and 0 < rep.crossover_time < 100
    assert rep.b_increasing_in_theta2
    fine = blockchain_impact(BASELINE, np.linspace(0, 100, 4001))
    assert fine.crossover_time == pytest.approx(rep.crossover_time, rel=1e-2)


def test_blockchain_requires_theta2():
    with pytest.raises(ValueError):
        blockchain_impact(BASELINE.replace(theta2=0.0), [0.0, 1.0])


def test_prop14_threshold_value():
    assert prop14_eta_threshold(BASELINE) == pytest.approx(18 * 1.6816 / (14 * 0.5024), rel=1e-10)
    assert prop14_eta_threshold(BASELINE) == pytest.approx(4.304, abs=1e-3)


def test_proposition_suite_baseline():
    checks = {c.prop: c for c in proposition_suite(BASELINE)}
    for prop in ("9(1)", "10(1)", "11(1)", "11(2)", "12(1)", "12(2)", "13(1)", "13(2)",
                 "14(1)", "14(2)", "14(3)"):
        assert checks[prop].status == "pass", (prop, checks[prop].detail)
    assert checks["9(2)"].status == "skipped" and checks["10(2)"].status == "skipped"
    nums = [float(x) for x in re.findall(r"[-+]?\d*\.\d+", checks["12(2)"].precondition)]
    assert nums[0] == pytest.approx(0.3099, abs=1e-4)
    assert nums[-2] == pytest.approx(8.24, abs=1e-2) and nums[-1] == pytest.approx(0.5067, abs=1e-4)


def test_proposition_suite_large_eta():
    checks = {c.prop: c for c in proposition_suite(BASELINE.replace(eta=20.0))}
    assert checks["9(2)"].status == "pass" and checks["10(2)"].status == "pass"


def test_proposition_suite_infeasible_inputs_skipped():
    checks = proposition_suite(BASELINE.replace(eta=1.0))
    by = {c.prop: c for c in checks}
    assert by["9(1)"].status == "skipped"
    assert "infeasible" in by["11(2)"].precondition


def test_universal_profit_orderings(draws100):
    for p in draws100:
        t, n = steady_state(T, p), steady_state(N, p)
        assert t.pi_G >= n.pi_G and t.pi_M >= n.pi_M


def test_random_draws_deterministic():
    a = random_feasible_params(np.random.default_rng(3), 5)
    b = random_feasible_params(np.random.default_rng(3), 5)
    assert a == b


def test_monotone_paths_on_baseline():
    for pol in (N, T, S):
        assert monotonicity_violations(trajectory(pol, BASELINE, np.linspace(0, 100, 1001))) == []
