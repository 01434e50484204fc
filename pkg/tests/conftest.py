import numpy as np
import pytest

from vaccine_game import BASELINE, ModelParams, Policy
from vaccine_game.analysis import random_feasible_params

N, T, S, C = Policy.NO_SUBSIDY, Policy.MANUFACTURER_Q, Policy.MANUFACTURER_D, Policy.CUSTOMER_P


def closed_form_limits(policy, p: ModelParams):
    """Q, G, lambda limits typed straight from the closed-form limits table."""
    dlt = 2 * p.theta1**2 * p.gamma1**2 + (2 * p.theta2**2 + p.theta3**2) * p.gamma2**2
    k8 = 8 * p.beta * p.delta * (p.r + p.delta)
    if policy is N:
        Q = 2 * p.gamma1 * p.theta1**2 * p.alpha / (k8 - dlt)
        G = p.gamma2 * (2 * p.theta2**2 + p.theta3**2) * p.alpha / (k8 - dlt)
        lam = p.alpha * p.delta / (k8 - dlt)
    elif policy is T:
        h = p.gamma1**2 * p.theta1**2
        core = (4 * p.alpha * p.delta * (p.r + p.delta) + p.eta * h) / (4 * (p.r + p.delta) * (k8 + h - dlt))
        Q = p.gamma1 * p.theta1**2 / p.delta * (core + p.eta / (4 * (p.r + p.delta)))
        G = p.gamma2 * (2 * p.theta2**2 + p.theta3**2) / p.delta * core
        lam = core
    else:
        k32 = 32 * p.beta * p.delta * (p.r + p.delta)
        Q = 2 * p.gamma1 * p.theta1**2 * (p.alpha + p.beta * p.eta) / (k32 - dlt)
        G = p.gamma2 * (2 * p.theta2**2 + p.theta3**2) * (p.alpha + p.beta * p.eta) / (k32 - dlt)
        lam = (p.alpha + p.beta * p.eta) * p.delta / (k32 - dlt)
    return Q, G, lam


@pytest.fixture
def base():
    return BASELINE


@pytest.fixture(scope="session")
def draws20():
    return random_feasible_params(np.random.default_rng(20240611), 20)


@pytest.fixture(scope="session")
def draws100():
    return random_feasible_params(np.random.default_rng(7), 100)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
