"""Saddle-path trajectories of the open-loop equilibria."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .equilibrium import (
    SERIES_FIELDS,
    Snapshot,
    assemble,
    efforts_from_costate,
    limits,
    reduced_system,
)
from .params import InfeasibleError, ModelParams, Policy, RegimeError


@dataclass(frozen=True)
class SaddlePath:
    """A(t) = A_inf + Lambda_A e^{kt},  lambda(t) = lambda_inf + Lambda_lambda e^{kt}."""

    policy: Policy
    k: float
    A_inf: float
    lambda_inf: float
    Lambda_A: float
    Lambda_lambda: float
    Q_inf: float
    G_inf: float

    @property
    def lambda0(self) -> float:
        return self.lambda_inf + self.Lambda_lambda

    def A(self, t):
        return self.A_inf + self.Lambda_A * np.exp(self.k * np.asarray(t, dtype=float))

    def lam(self, t):
        return self.lambda_inf + self.Lambda_lambda * np.exp(self.k * np.asarray(t, dtype=float))


def stable_root(m: float, c: float, delta: float, r: float) -> float:
    """Smaller eigenvalue of [[-delta, m], [-c, r + delta]]."""
    disc = r * r + 4 * delta * (r + delta) - 4 * m * c
    if disc <= 0:
        raise InfeasibleError("state-costate eigenvalues are not real", condition="stability")
    k = (r - math.sqrt(disc)) / 2
    if k >= 0:
        raise InfeasibleError("no decaying eigenvalue: saddle path does not exist", condition="stability")
    return k


def saddle_path(policy: Policy | str, params: ModelParams) -> SaddlePath:
    policy = Policy.parse(policy)
    base = Policy.NO_SUBSIDY if policy is Policy.CUSTOMER_P else policy
    sys = reduced_system(base, params)
    k = stable_root(sys.m, sys.c, sys.delta, sys.r)
    Q_inf, G_inf, lam_inf = limits(base, params)
    A_inf = params.gamma1 * Q_inf + params.gamma2 * G_inf
    Lambda_A = -A_inf
    # second row of the eigen-relation; equals (k + delta) Lambda_A / m whenever m != 0
    Lambda_lam = sys.c * Lambda_A / (sys.r + sys.delta - k)
    if lam_inf + Lambda_lam < 0:
        raise RegimeError(f"initial shadow price is negative ({lam_inf + Lambda_lam:.6g}); "
                          "efforts would be negative", condition="lambda0")
    return SaddlePath(policy=policy, k=k, A_inf=A_inf, lambda_inf=lam_inf, Lambda_A=Lambda_A,
                      Lambda_lambda=Lambda_lam, Q_inf=Q_inf, G_inf=G_inf)


def _forced_decay(const, amp, k, delta, t):
    """Solve y' = const + amp e^{kt} - delta y with y(0) = 0."""
    if abs(k + delta) > 1e-12 * max(1.0, delta):
        c1 = amp / (k + delta)
        y_inf = const / delta
        return y_inf + c1 * np.exp(k * t) - (y_inf + c1) * np.exp(-delta * t)
    return const / delta * (1 - np.exp(-delta * t)) + amp * t * np.exp(-delta * t)


@dataclass
class TimeSeries:
    """Column-oriented trajectory; one array per snapshot field."""

    policy: Policy
    t: np.ndarray
    Q: np.ndarray
    G: np.ndarray
    A: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    q: np.ndarray
    b: np.ndarray
    a: np.ndarray
    omega: np.ndarray
    p: np.ndarray
    subsidy: np.ndarray
    D: np.ndarray
    pi_G: np.ndarray
    pi_M: np.ndarray
    pi_R: np.ndarray

    def __len__(self):
        return len(self.t)

    def snapshot(self, i: int) -> Snapshot:
        return Snapshot(policy=self.policy, **{k: float(getattr(self, k)[i]) for k in SERIES_FIELDS})

    def columns(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in SERIES_FIELDS}


def check_grid(grid) -> np.ndarray:
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be a nonempty 1-D sequence")
    if t[0] != 0:
        raise ValueError("time grid must start at 0")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


def trajectory(policy: Policy | str, params: ModelParams, grid, psi=None) -> TimeSeries:
    """Equilibrium path on ``grid`` from Q(0) = G(0) = 0.

    For customer-p, ``psi`` is the reimbursement share (scalar or one value per
    grid point); the path is the no-subsidy path with prices rescaled.
    """
    policy = Policy.parse(policy)
    t = check_grid(grid)
    if policy is Policy.CUSTOMER_P:
        base = trajectory(Policy.NO_SUBSIDY, params, t)
        return customer_p_response(params, np.broadcast_to(0.0 if psi is None else psi, t.shape), base)
    path = saddle_path(policy, params)
    lam = path.lam(t)
    A = path.A(t)
    # efforts are affine in lambda: split into a constant and an e^{kt} part
    e_inf = efforts_from_costate(policy, params, path.lambda_inf, 2 * path.lambda_inf)
    e_0 = efforts_from_costate(policy, params, path.lambda0, 2 * path.lambda0)
    q_inf, b_inf, a_inf = (float(x) for x in e_inf)
    q_k, b_k, a_k = (float(x0) - float(xi) for x0, xi in zip(e_0, e_inf))
    pr = params
    Q = _forced_decay(pr.theta1 * q_inf, pr.theta1 * q_k, path.k, pr.delta, t)
    G = _forced_decay(pr.theta2 * b_inf + pr.theta3 * a_inf, pr.theta2 * b_k + pr.theta3 * a_k,
                      path.k, pr.delta, t)
    cols = assemble(policy, params, t, Q, G, A, lam)
    return TimeSeries(policy=policy, **cols)


def customer_p_response(params: ModelParams, psi_path, base: TimeSeries) -> TimeSeries:
    """Price response to a reimbursement path psi(t): prices scale by 1/(1 - psi).

    Demand, efforts and states are those of the no-subsidy ``base`` series.
    """
    if base.policy is not Policy.NO_SUBSIDY:
        raise ValueError("customer-p response is built on a no-subsidy base trajectory")
    psi = np.asarray(psi_path, dtype=float)
    if psi.shape != base.t.shape:
        raise ValueError("psi path must have one value per grid point")
    if np.any(psi < 0) or np.any(psi >= 1):
        raise ValueError("reimbursement share psi must lie in [0, 1)")
    cols = assemble(Policy.CUSTOMER_P, params, base.t, base.Q, base.G, base.A, base.lam, psi=psi)
    return TimeSeries(policy=Policy.CUSTOMER_P, **cols)


def discounted_value(rate, r: float, t=None, *, steady_rate: float | None = None,
                     tail_tol: float | None = None) -> float:
    """Present value of a profit-rate series on a uniform grid plus an analytic tail.

    The tail beyond the last grid point is steady_rate * e^{-rT} / r, with
    steady_rate defaulting to the last sample. Pass ``tail_tol`` to insist the
    horizon is long enough that e^{-rT} < tail_tol.
    """
    rate = np.asarray(rate, dtype=float)
    if rate.size == 0:
        raise ValueError("empty profit series")
    if r <= 0:
        raise ValueError("discount rate must be positive")
    if t is None:
        t = np.arange(rate.size, dtype=float)
    t = np.asarray(t, dtype=float)
    if t.shape != rate.shape:
        raise ValueError("time grid and series lengths differ")
    if t.size > 2 and not np.allclose(np.diff(t), t[1] - t[0], rtol=1e-9, atol=0):
        raise ValueError("discounted_value needs a uniform grid")
    T = float(t[-1])
    if tail_tol is not None and math.exp(-r * T) >= tail_tol:
        raise ValueError(f"horizon {T:g} too short: exp(-r T) = {math.exp(-r * T):.3g} >= {tail_tol:g}")
    body = 0.0 if t.size == 1 else float(integrate.simpson(np.exp(-r * t) * rate, x=t))
    tail_rate = float(rate[-1]) if steady_rate is None else steady_rate
    return body + tail_rate * math.exp(-r * T) / r
