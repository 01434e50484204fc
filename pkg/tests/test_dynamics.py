import numpy as np
import pytest
from conftest import C, N, S, T
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp

from vaccine_game import (
    BASELINE,
    InfeasibleError,
    customer_p_response,
    discounted_value,
    reduced_system,
    saddle_path,
    steady_state,
    trajectory,
)
from vaccine_game.dynamics import _forced_decay, stable_root

GRID = np.linspace(0, 100, 1001)


@pytest.mark.parametrize("policy,k", [(N, -0.08090), (T, -0.08894), (S, -0.09553)])
def test_stable_root(policy, k):
    path = saddle_path(policy, BASELINE)
    assert path.k == pytest.approx(k, abs=1e-5)
    eig = np.linalg.eigvals(reduced_system(policy, BASELINE).matrix())
    assert path.k == pytest.approx(eig.real.min(), rel=1e-12)


@pytest.mark.parametrize("policy", [N, T, S])
def test_saddle_path_is_eigenvector(policy):
    path = saddle_path(policy, BASELINE)
    M = reduced_system(policy, BASELINE).matrix()
    v = np.array([path.Lambda_A, path.Lambda_lambda])
    np.testing.assert_allclose(M @ v, path.k * v, rtol=1e-12)
    assert path.A(0.0) == 0


def test_initial_costate_and_subsidies():
    assert saddle_path(N, BASELINE).lambda0 == pytest.approx(2.898, abs=1e-3)
    t = np.array([0.0, 1e3])
    phi = trajectory(T, BASELINE, t).subsidy
    assert phi[0] == pytest.approx(0.5842, abs=1e-4) and phi[1] == pytest.approx(0.4518, abs=1e-4)
    F = trajectory(S, BASELINE, t).subsidy
    assert F[0] == pytest.approx(31 / 14, rel=1e-12) and F[1] == pytest.approx(1.812, abs=1e-3)


def test_unstable_parameters_refused():
    with pytest.raises(InfeasibleError):
        saddle_path(N, BASELINE.replace(beta=0.1))
    with pytest.raises(InfeasibleError):
        stable_root(1.0, 1.0, 0.1, 0.03)


@pytest.mark.parametrize("policy", [N, T, S])
def test_initial_costate_positive_on_draws(policy, draws20):
    # stability keeps lambda(0) > 0, so the negative-costate guard is defensive only
    for p in draws20:
        path = saddle_path(policy, p)
        assert 0 < path.lambda0 < path.lambda_inf


@pytest.mark.parametrize("policy", [N, T, S, C])
def test_initial_conditions(policy):
    ts = trajectory(policy, BASELINE, GRID)
    assert ts.Q[0] == ts.G[0] == ts.A[0] == 0
    assert ts.D[0] == pytest.approx(18 - 7 * ts.p[0], rel=1e-14)


@pytest.mark.parametrize("policy", [N, T, S])
def test_converges_to_steady_state(policy):
    ss = steady_state(policy, BASELINE)
    last = trajectory(policy, BASELINE, [0.0, 400.0]).snapshot(-1)
    for f in ("Q", "G", "A", "lam", "q", "b", "a", "omega", "p", "subsidy", "D", "pi_G", "pi_M", "pi_R"):
        assert getattr(last, f) == pytest.approx(getattr(ss, f), rel=1e-6), f


@pytest.mark.parametrize("policy", [N, T, S])
def test_states_match_numerical_integration(policy):
    path = saddle_path(policy, BASELINE)
    p = BASELINE
    ts = trajectory(policy, p, GRID)

    def rhs(t, y):
        lam = path.lam(t)
        one = trajectory(policy, p, [0.0, t]) if t > 0 else trajectory(policy, p, [0.0])
        q, b, a = one.q[-1], one.b[-1], one.a[-1]
        assert one.lam[-1] == pytest.approx(lam)
        return [p.theta1 * q - p.delta * y[0], p.theta2 * b + p.theta3 * a - p.delta * y[1]]

    sol = solve_ivp(rhs, (0, 100), [0, 0], t_eval=GRID[::50], rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(ts.Q[::50], sol.y[0], rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(ts.G[::50], sol.y[1], rtol=1e-7, atol=1e-9)


def test_forced_decay_resonance():
    t = np.linspace(0, 30, 7)
    y = _forced_decay(2.0, 3.0, -0.1, 0.1, t)
    sol = solve_ivp(lambda s, v: [2 + 3 * np.exp(-0.1 * s) - 0.1 * v[0]], (0, 30), [0], t_eval=t,
                    rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(y, sol.y[0], rtol=1e-8)


@pytest.mark.parametrize("policy", [N, T, S, C])
def test_aggregate_identity_and_mu(policy):
    ts = trajectory(policy, BASELINE, GRID)
    np.testing.assert_allclose(0.3 * ts.Q + 0.2 * ts.G, ts.A, rtol=1e-8, atol=0)
    np.testing.assert_array_equal(ts.mu, 2 * ts.lam)


def test_no_subsidy_demand_accounting():
    ts = trajectory(N, BASELINE, GRID)
    np.testing.assert_allclose(ts.D, (18 + ts.A) / 4, rtol=1e-12)
    np.testing.assert_allclose(ts.p - ts.omega, (18 + ts.A) / 28, rtol=1e-12)


def test_no_subsidy_monotone():
    ts = trajectory(N, BASELINE, GRID)
    for f in ("q", "b", "a", "Q", "G", "p", "omega", "D"):
        assert np.all(np.diff(getattr(ts, f)) >= -1e-12), f


def test_grid_validation():
    for bad in ([], [1.0, 2.0], [0.0, 2.0, 1.0], [0.0, 0.0]):
        with pytest.raises(ValueError):
            trajectory(N, BASELINE, bad)


def test_customer_p_examples():
    base = trajectory(N, BASELINE, GRID)
    zero = customer_p_response(BASELINE, np.zeros_like(GRID), base)
    for f in ("Q", "G", "A", "lam", "q", "b", "a", "omega", "p", "D", "pi_M", "pi_R", "pi_G"):
        np.testing.assert_array_equal(getattr(zero, f), getattr(base, f))
    half = customer_p_response(BASELINE, np.full_like(GRID, 0.5), base)
    np.testing.assert_allclose(half.p, 2 * base.p, rtol=1e-15)
    np.testing.assert_allclose(half.D, base.D, rtol=1e-14)
    nine = customer_p_response(BASELINE, np.full_like(GRID, 0.9), base)
    np.testing.assert_allclose(nine.p, 10 * base.p, rtol=1e-13)
    np.testing.assert_allclose(0.1 * nine.p, base.p, rtol=1e-13)


def test_customer_p_rejects_bad_inputs():
    base = trajectory(N, BASELINE, GRID)
    with pytest.raises(ValueError):
        customer_p_response(BASELINE, np.ones_like(GRID), base)
    with pytest.raises(ValueError):
        customer_p_response(BASELINE, np.zeros(3), base)
    with pytest.raises(ValueError):
        customer_p_response(BASELINE, np.zeros_like(GRID), trajectory(T, BASELINE, GRID))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 0.95), min_size=21, max_size=21))
def test_customer_p_neutral_for_any_path(psi):
    base = trajectory(N, BASELINE, np.linspace(0, 100, 21))
    psi = np.array(psi)
    out = customer_p_response(BASELINE, psi, base)
    np.testing.assert_allclose(out.D, base.D, rtol=1e-10)
    np.testing.assert_array_equal(out.Q, base.Q)
    np.testing.assert_allclose(out.p * (1 - psi), base.p, rtol=1e-12)


def test_discounted_value_constant():
    t = np.linspace(0, 200, 2001)
    assert discounted_value(np.ones_like(t), 0.03, t) == pytest.approx(1 / 0.03, rel=1e-10)
    assert discounted_value(np.zeros_like(t), 0.03, t) == 0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 0.2), st.floats(-1, 1), st.floats(0.05, 1))
def test_discounted_value_against_quad(r, amp, decay):
    t = np.linspace(0, 300, 3001)
    f = lambda s: 2 + amp * np.exp(-decay * s)  # noqa: E731
    ref, _ = quad(lambda s: np.exp(-r * s) * f(s), 0, np.inf, limit=200)
    assert discounted_value(f(t), r, t, steady_rate=2.0) == pytest.approx(ref, rel=1e-7)


def test_discounted_profit_horizon_insensitive():
    vals = []
    for T_end in (200, 400):
        t = np.linspace(0, T_end, 20 * T_end + 1)
        ts = trajectory(N, BASELINE, t)
        vals.append(discounted_value(ts.pi_M, BASELINE.r, t))
    assert vals[0] > 0
    assert abs(vals[1] - vals[0]) < 1e-3 * abs(vals[0])


def test_discounted_value_errors():
    with pytest.raises(ValueError):
        discounted_value([], 0.03)
    with pytest.raises(ValueError):
        discounted_value([1, 1, 1], 0.03, [0, 1, 3])
    with pytest.raises(ValueError):
        discounted_value([1, 1], 0.03, [0, 10], tail_tol=0.1)
