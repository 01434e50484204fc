"""Closed-form equilibrium closures, reduced aggregate dynamics and steady states.

All closure functions broadcast over numpy arrays so the steady state and the
trajectory are assembled through exactly the same code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from .params import (
    InfeasibleError,
    ModelParams,
    Policy,
    RegimeError,
    compute_delta,
    validate,
)


# ----------------------------------------------------------------------------
# snapshot containers
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Snapshot:
    """Decisions, states and profit rates of all three players at one instant.

    ``subsidy`` is phi (technology-cost share) under manu-q, F (payment per dose)
    under manu-d, psi (price reimbursement share) under customer-p, 0 otherwise.
    """

    policy: Policy
    t: float
    Q: float
    G: float
    A: float
    lam: float
    mu: float
    q: float
    b: float
    a: float
    omega: float
    p: float
    subsidy: float
    D: float
    pi_G: float
    pi_M: float
    pi_R: float


class SteadyState(Snapshot):
    """Snapshot evaluated in the t -> infinity limit."""


# column order shared by snapshots, time series and CSV output
SERIES_FIELDS = tuple(f.name for f in fields(Snapshot) if f.name != "policy")


class SubsidyValue(NamedTuple):
    value: float | np.ndarray
    clamped: bool | np.ndarray


# ----------------------------------------------------------------------------
# static closures
# ----------------------------------------------------------------------------

def demand(params: ModelParams, p, Q, G, psi=0.0):
    """Sales rate alpha - beta (1 - psi) p + gamma1 Q + gamma2 G.

    Negative values are returned as-is; callers decide whether that is feasible.
    """
    return params.alpha - params.beta * (1.0 - np.asarray(psi)) * p + params.gamma1 * Q + params.gamma2 * G


def prices_from_state(policy: Policy | str, params: ModelParams, A):
    """Wholesale and retail price (omega, p) as functions of the aggregate level A."""
    policy = Policy.parse(policy)
    A = np.asarray(A, dtype=float)
    if np.any(A < 0):
        raise ValueError("aggregate level A must be nonnegative")
    s = params.alpha + A
    b = params.beta
    if policy is Policy.MANUFACTURER_D:
        if np.any(params.eta * b < s):
            raise RegimeError(
                "per-dose subsidy clamps at zero (eta*beta < alpha + A); boundary regime not supported",
                condition="interior_S")
        return (3 * s - params.eta * b) / (4 * b), (7 * s - params.eta * b) / (8 * b)
    return s / (2 * b), 3 * s / (4 * b)


def efforts_from_costate(policy: Policy | str, params: ModelParams, lam, mu):
    """Technology, blockchain and advertising efforts (q, b, a) from the shadow prices."""
    policy = Policy.parse(policy)
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(lam < 0) or np.any(mu < 0):
        raise ValueError("costates must be nonnegative")
    p = params
    if policy is Policy.MANUFACTURER_Q:
        phi = subsidy_control(policy, p, 0.0, mu)
        q = np.where(phi.clamped, p.gamma1 * p.theta1 * mu,
                     p.gamma1 * p.theta1 * (mu / 2 + p.eta / (4 * p.rd)))
        return q, p.gamma2 * p.theta2 * mu, p.gamma2 * p.theta3 * lam
    if policy is Policy.MANUFACTURER_D:
        return p.gamma1 * p.theta1 * mu, p.gamma2 * p.theta2 * mu, p.gamma2 * p.theta3 * lam
    # no subsidy (and customer-p): mu = 2 lambda in equilibrium
    return 2 * p.gamma1 * p.theta1 * lam, 2 * p.gamma2 * p.theta2 * lam, p.gamma2 * p.theta3 * lam


def subsidy_control(policy: Policy | str, params: ModelParams, A, mu) -> SubsidyValue:
    """Government subsidy: phi under manu-q (uses mu), F under manu-d (uses A)."""
    policy = Policy.parse(policy)
    p = params
    if policy is Policy.MANUFACTURER_Q:
        mu = np.asarray(mu, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = 1 - 4 * p.rd * mu / (p.eta + 2 * p.rd * mu)
        # eta = mu = 0 leaves 0/0; nothing to subsidise there
        raw = np.where(np.isnan(raw), 0.0, raw)
    elif policy is Policy.MANUFACTURER_D:
        A = np.asarray(A, dtype=float)
        raw = (p.eta * p.beta - (p.alpha + A)) / (2 * p.beta)
    else:
        raise ValueError(f"policy {policy.value} has no subsidy control")
    clamped = raw < 0
    value = np.maximum(raw, 0.0)
    if value.ndim == 0:
        return SubsidyValue(float(value), bool(clamped))
    return SubsidyValue(value, clamped)


def profit_rates(policy: Policy | str, params: ModelParams, snapshot: Snapshot):
    """Instantaneous (pi_G, pi_M, pi_R) under the policy's accounting rules."""
    policy = Policy.parse(policy)
    if snapshot.policy is not policy:
        raise ValueError(f"snapshot belongs to policy {snapshot.policy.value}, not {policy.value}")
    return _profits(policy, params, snapshot.D, snapshot.omega, snapshot.p,
                    snapshot.q, snapshot.b, snapshot.a, snapshot.subsidy)


def _profits(policy, params, D, omega, p, q, b, a, subsidy):
    eta = params.eta
    pi_R = D * (p - omega) - a**2 / 2
    if policy is Policy.MANUFACTURER_Q:
        phi = subsidy
        return eta * D - phi * q**2 / 2, D * omega - (1 - phi) * q**2 / 2 - b**2 / 2, pi_R
    if policy is Policy.MANUFACTURER_D:
        F = subsidy
        return (eta - F) * D, D * (omega + F) - q**2 / 2 - b**2 / 2, pi_R
    pi_M = D * omega - q**2 / 2 - b**2 / 2
    if policy is Policy.CUSTOMER_P:
        return (eta - subsidy * p) * D, pi_M, pi_R
    return eta * D, pi_M, pi_R


# ----------------------------------------------------------------------------
# reduced aggregate system
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedSystem:
    """Linear dynamics of the aggregate A and the retailer costate lambda.

        A'      = m * lambda - delta * A + s_A
        lambda' = (r + delta) * lambda - c * (A + s_lambda)
    """

    m: float
    c: float
    s_A: float
    s_lambda: float
    delta: float
    r: float

    def matrix(self) -> np.ndarray:
        return np.array([[-self.delta, self.m], [-self.c, self.r + self.delta]])

    def rhs(self, A, lam):
        dA = self.m * lam - self.delta * A + self.s_A
        dlam = (self.r + self.delta) * lam - self.c * (A + self.s_lambda)
        return dA, dlam


def reduced_system(policy: Policy | str, params: ModelParams) -> ReducedSystem:
    """Coefficients of the reduced state-costate system for an interior regime.

    The coefficients follow from substituting mu = 2 lambda and the effort
    closures into A' = gamma1 Q' + gamma2 G'; the costate coupling c is the one
    whose stationary point reproduces the closed-form limits of lambda.
    """
    policy = Policy.parse(policy)
    validate(params, policy).raise_if_infeasible()
    p = params
    dlt = compute_delta(p)
    tech = p.gamma1**2 * p.theta1**2
    if policy is Policy.MANUFACTURER_Q:
        return ReducedSystem(m=dlt - tech, c=1 / (8 * p.beta), s_A=tech * p.eta / (4 * p.rd),
                             s_lambda=p.alpha, delta=p.delta, r=p.r)
    if policy is Policy.MANUFACTURER_D:
        return ReducedSystem(m=dlt, c=1 / (32 * p.beta), s_A=0.0,
                             s_lambda=p.alpha + p.eta * p.beta, delta=p.delta, r=p.r)
    return ReducedSystem(m=dlt, c=1 / (8 * p.beta), s_A=0.0, s_lambda=p.alpha, delta=p.delta, r=p.r)


# ----------------------------------------------------------------------------
# steady state
# ----------------------------------------------------------------------------

def limits(policy: Policy | str, params: ModelParams) -> tuple[float, float, float]:
    """(Q, G, lambda) as t -> infinity for an interior regime."""
    policy = Policy.parse(policy)
    p = params
    dlt = compute_delta(p)
    goodwill_mix = 2 * p.theta2**2 + p.theta3**2
    kappa = 8 * p.beta * p.delta * p.rd
    if policy is Policy.MANUFACTURER_Q:
        tech = p.gamma1**2 * p.theta1**2
        lam = (4 * p.alpha * p.delta * p.rd + p.eta * tech) / (4 * p.rd * (kappa + tech - dlt))
        Q = p.gamma1 * p.theta1**2 / p.delta * (lam + p.eta / (4 * p.rd))
        G = p.gamma2 * goodwill_mix / p.delta * lam
        return Q, G, lam
    if policy is Policy.MANUFACTURER_D:
        scale = (p.alpha + p.beta * p.eta) / (4 * kappa - dlt)
        return 2 * p.gamma1 * p.theta1**2 * scale, p.gamma2 * goodwill_mix * scale, p.delta * scale
    scale = p.alpha / (kappa - dlt)
    return 2 * p.gamma1 * p.theta1**2 * scale, p.gamma2 * goodwill_mix * scale, p.delta * scale


def assemble(policy: Policy, params: ModelParams, t, Q, G, A, lam, psi=None) -> dict:
    """Fill prices, efforts, subsidy, demand and profits from states and costate.

    Returns a dict of arrays (or scalars) keyed by SERIES_FIELDS.
    """
    base = Policy.NO_SUBSIDY if policy is Policy.CUSTOMER_P else policy
    mu = 2 * np.asarray(lam, dtype=float)
    q, b, a = efforts_from_costate(base, params, lam, mu)
    omega, p = prices_from_state(base, params, A)
    if policy is Policy.MANUFACTURER_Q:
        sub = subsidy_control(policy, params, A, mu)
        if np.any(sub.clamped):
            raise RegimeError("technology subsidy clamps at zero; boundary regime not supported",
                              condition="interior_T")
        subsidy = sub.value
    elif policy is Policy.MANUFACTURER_D:
        subsidy = subsidy_control(policy, params, A, mu).value
    elif policy is Policy.CUSTOMER_P:
        subsidy = np.zeros_like(np.asarray(A, dtype=float)) if psi is None else np.asarray(psi, dtype=float)
        if np.any(subsidy < 0) or np.any(subsidy >= 1):
            raise ValueError("reimbursement share psi must lie in [0, 1)")
        omega = omega / (1 - subsidy)
        p = p / (1 - subsidy)
    else:
        subsidy = np.zeros_like(np.asarray(A, dtype=float))
    D = demand(params, p, Q, G, psi=subsidy if policy is Policy.CUSTOMER_P else 0.0)
    pi_G, pi_M, pi_R = _profits(policy, params, D, omega, p, q, b, a, subsidy)
    values = dict(t=t, Q=Q, G=G, A=A, lam=lam, mu=mu, q=q, b=b, a=a, omega=omega, p=p,
                  subsidy=subsidy, D=D, pi_G=pi_G, pi_M=pi_M, pi_R=pi_R)
    return {k: np.asarray(v, dtype=float) for k, v in values.items()}


def steady_state(policy: Policy | str, params: ModelParams, psi: float = 0.0) -> SteadyState:
    """Limits of every decision, state and profit rate under the given policy.

    customer-p is evaluated at a constant reimbursement share ``psi``; its states
    coincide with the no-subsidy model.
    """
    policy = Policy.parse(policy)
    validate(params, policy).raise_if_infeasible()
    base = Policy.NO_SUBSIDY if policy is Policy.CUSTOMER_P else policy
    Q, G, lam = limits(base, params)
    A = params.gamma1 * Q + params.gamma2 * G
    vals = assemble(policy, params, math.inf, Q, G, A, lam,
                    psi=psi if policy is Policy.CUSTOMER_P else None)
    return SteadyState(policy=policy, **{k: float(v) for k, v in vals.items()})
