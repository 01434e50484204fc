"""Cross-policy comparisons, sensitivity sweeps, threshold search and proposition checks."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dynamics import TimeSeries, saddle_path, trajectory
from .equilibrium import SteadyState, Snapshot, steady_state
from .params import (
    DYNAMIC_POLICIES,
    PARAM_NAMES,
    InfeasibleError,
    ModelParams,
    Policy,
    compute_delta,
    eta_threshold_S,
    eta_threshold_T,
    validate,
)

log = logging.getLogger(__name__)

N, T, S = Policy.NO_SUBSIDY, Policy.MANUFACTURER_Q, Policy.MANUFACTURER_D

MONOTONE_UP = ("q", "b", "a", "Q", "G", "p", "omega", "D")


# ----------------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------------

def sign(x: float, scale: float = 1.0) -> str:
    if abs(x) <= 1e-12 * max(1.0, abs(scale)):
        return "0"
    return "+" if x > 0 else "-"


def monotone_direction(values, slack: float = 1e-12) -> str:
    """Classify a sequence as increasing, decreasing, constant or mixed."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return "constant"
    d = np.diff(v)
    tol = slack * np.maximum(1.0, np.abs(v[1:]))
    up, down = np.all(d >= -tol), np.all(d <= tol)
    if up and down:
        return "constant"
    if up:
        return "increasing"
    if down:
        return "decreasing"
    return "mixed"


def monotonicity_violations(ts: TimeSeries, slack: float = 1e-12) -> list[str]:
    """Names of series that break the monotone-in-time pattern of the equilibrium."""
    bad = [name for name in MONOTONE_UP
           if monotone_direction(getattr(ts, name), slack) not in ("increasing", "constant")]
    if ts.policy in (T, S) and monotone_direction(ts.subsidy, slack) not in ("decreasing", "constant"):
        bad.append("subsidy")
    return bad


def early_time(params: ModelParams, policies=(T, S, N)) -> float:
    """tau = min(0.1, |1 / (10 k_max)|) with k_max the fastest decay rate among the policies."""
    k_max = min(saddle_path(p, params).k for p in policies)
    return min(0.1, abs(1 / (10 * k_max)))


def draw_params(rng: np.random.Generator, base: ModelParams, spread: float = 2.0) -> ModelParams:
    """Log-uniform perturbation of every field within [base/spread, base*spread]."""
    values = {}
    for name in PARAM_NAMES:
        v = getattr(base, name)
        values[name] = v * math.exp(rng.uniform(-math.log(spread), math.log(spread))) if v > 0 else v
    return ModelParams(**values)


def random_feasible_params(rng: np.random.Generator, n: int, base: ModelParams | None = None,
                           policies=DYNAMIC_POLICIES, max_tries: int = 100_000) -> list[ModelParams]:
    """Draw ``n`` parameter sets for which every listed policy has an interior saddle path."""
    base = ModelParams() if base is None else base
    out = []
    for _ in range(max_tries):
        if len(out) == n:
            break
        cand = draw_params(rng, base)
        try:
            for pol in policies:
                saddle_path(pol, cand)
        except InfeasibleError:
            continue
        out.append(cand)
    if len(out) < n:
        raise RuntimeError(f"only {len(out)} feasible draws in {max_tries} tries")
    return out


# ----------------------------------------------------------------------------
# policy comparison
# ----------------------------------------------------------------------------

SIGN_COLUMNS = {
    "q,b,a": (("q", "b", "a"), ("tau", "inf")),
    "A": (("A",), ("tau", "inf")),
    "omega,p": (("omega", "p"), ("tau", "inf")),
    "D(tau)": (("D",), ("tau",)),
    "D(inf)": (("D",), ("inf",)),
    "pi_G(tau)": (("pi_G",), ("tau",)),
    "pi_G(inf)": (("pi_G",), ("inf",)),
}

COMPARED = ("q", "b", "a", "A", "omega", "p", "D", "pi_G", "pi_M")


@dataclass
class ComparisonTable:
    tau: float
    values: dict[tuple[str, str, str], float]          # (policy, quantity, tau|inf) -> value
    signs: dict[tuple[str, str], str]                  # (quantity, tau|inf) -> sign of T - S
    orderings: dict[str, bool]                         # three-way relations at tau and infinity

    def sign_row(self, policy: Policy | str = T) -> dict[str, str]:
        """Sign pattern in the layout of the two-policy characteristics table."""
        policy = Policy.parse(policy)
        flip = {"+": "-", "-": "+", "0": "0", "?": "?"}
        row = {}
        for col, (quantities, times) in SIGN_COLUMNS.items():
            got = {self.signs[(q, when)] for q in quantities for when in times}
            s = got.pop() if len(got) == 1 else "?"
            row[col] = s if policy is T else flip[s]
        return row


def compare_policies(params: ModelParams, tau: float | None = None, grid=None) -> ComparisonTable:
    """Evaluate all three dynamic policies at an early time tau and at steady state."""
    for pol in (T, S):
        validate(params, pol).raise_if_infeasible()
    tau = early_time(params) if tau is None else tau
    values = {}
    early: dict[Policy, Snapshot] = {}
    late: dict[Policy, SteadyState] = {}
    for pol in DYNAMIC_POLICIES:
        ts = trajectory(pol, params, [0.0, tau])
        early[pol] = ts.snapshot(1)
        late[pol] = steady_state(pol, params)
        for qty in COMPARED:
            values[(pol.value, qty, "tau")] = getattr(early[pol], qty)
            values[(pol.value, qty, "inf")] = getattr(late[pol], qty)
    signs = {}
    for qty in COMPARED:
        for when, snaps in (("tau", early), ("inf", late)):
            x, y = getattr(snaps[T], qty), getattr(snaps[S], qty)
            signs[(qty, when)] = sign(x - y, max(abs(x), abs(y)))

    e, s = early, late
    orderings = {
        "p: S < * < T at tau": e[S].p < e[N].p < e[T].p,
        "omega: S < * < T at tau": e[S].omega < e[N].omega < e[T].omega,
        "p: S < * <= T at inf": s[S].p < s[N].p <= s[T].p,
        "omega: S < * <= T at inf": s[S].omega < s[N].omega <= s[T].omega,
        "D: S > T > * at tau": e[S].D > e[T].D > e[N].D,
        "D: T >= * at inf": s[T].D >= s[N].D,
        "D: S > * at inf": s[S].D > s[N].D,
        "pi_G: T > S > * at inf": s[T].pi_G > s[S].pi_G > s[N].pi_G,
    }
    if grid is not None:
        t = np.asarray(grid, dtype=float)
        tr = {pol: trajectory(pol, params, t) for pol in (T, S)}
        later = t > 0
        for qty in ("q", "b", "a", "A", "omega", "p"):
            orderings[f"{qty}: T > S on grid"] = bool(
                np.all(getattr(tr[T], qty)[later] > getattr(tr[S], qty)[later]))
    return ComparisonTable(tau=tau, values=values, signs=signs, orderings=orderings)


# ----------------------------------------------------------------------------
# parameter sweeps
# ----------------------------------------------------------------------------

SWEEP_FIELDS = ("Q", "G", "A", "lam", "q", "b", "a", "omega", "p", "subsidy", "D", "pi_G", "pi_M", "pi_R")

# expected direction of each steady-state quantity as eta grows
ETA_ARROWS = {
    T: {"Q": "increasing", "G": "increasing", "D": "increasing", "pi_G": "increasing",
        "pi_M": "increasing", "p": "increasing", "omega": "increasing", "subsidy": "increasing"},
    S: {"Q": "increasing", "G": "increasing", "D": "increasing", "pi_G": "increasing",
        "pi_M": "increasing", "p": "decreasing", "omega": "decreasing", "subsidy": "increasing"},
}


@dataclass
class SweepResult:
    name: str
    grid: np.ndarray
    policies: tuple[Policy, ...]
    steady: dict[Policy, list[SteadyState | None]]
    initial: dict[Policy, list[Snapshot | None]]
    skipped: list[tuple[float, str, str]] = field(default_factory=list)

    def series(self, policy: Policy, qty: str, which: str = "steady") -> np.ndarray:
        rows = (self.steady if which == "steady" else self.initial)[policy]
        return np.array([math.nan if s is None else getattr(s, qty) for s in rows])

    def verdict(self, policy: Policy, qty: str, which: str = "steady") -> str:
        v = self.series(policy, qty, which)
        return monotone_direction(v[~np.isnan(v)])

    def verdicts(self, which: str = "steady") -> dict[tuple[Policy, str], str]:
        return {(pol, qty): self.verdict(pol, qty, which) for pol in self.policies for qty in SWEEP_FIELDS}


def _sweep_point(params, name, value, policies):
    pt = params.replace(**{name: float(value)})
    out = {}
    for pol in policies:
        try:
            ts = trajectory(pol, pt, [0.0])
            out[pol] = (steady_state(pol, pt), ts.snapshot(0), None)
        except (InfeasibleError, ValueError) as exc:
            out[pol] = (None, None, str(exc))
    return out


def sweep(params: ModelParams, name: str, grid, policies=DYNAMIC_POLICIES,
          workers: int | None = None) -> SweepResult:
    """Steady states and initial values of each policy across a one-parameter grid.

    Infeasible points are skipped (and listed in ``skipped``), never interpolated.
    Points may be evaluated concurrently; results are gathered in grid order.
    """
    if name not in PARAM_NAMES:
        raise ValueError(f"unknown parameter {name!r}")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("sweep grid must be strictly increasing")
    policies = tuple(Policy.parse(p) for p in policies)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(lambda v: _sweep_point(params, name, v, policies), grid))
    else:
        points = [_sweep_point(params, name, v, policies) for v in grid]
    res = SweepResult(name=name, grid=grid, policies=policies,
                      steady={p: [] for p in policies}, initial={p: [] for p in policies})
    for value, point in zip(grid, points):
        for pol in policies:
            ss, init, err = point[pol]
            res.steady[pol].append(ss)
            res.initial[pol].append(init)
            if err is not None:
                log.warning("skipping %s=%g for policy %s: %s", name, value, pol.value, err)
                res.skipped.append((float(value), pol.value, err))
    return res


@dataclass
class ArrowCheck:
    policy: Policy
    quantity: str
    expected: str
    observed: str
    precondition: str = ""
    precondition_holds: bool = True

    @property
    def ok(self) -> bool:
        return self.expected == self.observed


def eta_arrow_check(result: SweepResult, params: ModelParams) -> list[ArrowCheck]:
    """Compare an eta-sweep against the expected comparative-statics arrows.

    The per-dose policy's retail price only falls when 4 beta delta (r+delta) > Delta;
    that precondition is evaluated at every grid point and, where it fails,
    the corresponding points are left out of the verdict.
    """
    if result.name != "eta":
        raise ValueError("the arrow table refers to an eta sweep")
    checks = []
    for pol, arrows in ETA_ARROWS.items():
        if pol not in result.policies:
            continue
        for qty, expected in arrows.items():
            v = result.series(pol, qty)
            keep = ~np.isnan(v)
            pre, pre_ok = "", True
            if pol is S and qty == "p":
                pre = "4*beta*delta*(r+delta) > Delta"
                cond = np.array([4 * pt.beta * pt.delta * pt.rd > compute_delta(pt)
                                 for pt in (params.replace(eta=float(x)) for x in result.grid)])
                pre_ok = bool(np.all(cond[keep]))
                keep &= cond
            checks.append(ArrowCheck(pol, qty, expected, monotone_direction(v[keep]), pre, pre_ok))
    return checks


# ----------------------------------------------------------------------------
# beta thresholds in the symmetric, patient limit
# ----------------------------------------------------------------------------

# beta / (rho^2 / delta^2) at which the per-dose subsidy overtakes the technology subsidy
THRESHOLD_CONSTANTS = {"government": 1.04462, "manufacturer": 0.68255}


@dataclass
class ThresholdResult:
    target: str
    crossing: float
    bracket: tuple[float, float]
    analytic: float
    rel_gap: float
    iterations: int
    endpoint_values: tuple[float, float]


def symmetric_params(rho: float, delta: float, beta: float, eta: float, r: float,
                     alpha: float = 18.0) -> ModelParams:
    """Parameters with gamma1 theta1 = gamma2 theta2 = gamma2 theta3 = rho."""
    return ModelParams(alpha=alpha, beta=beta, theta1=rho, theta2=rho, theta3=rho,
                       gamma1=1.0, gamma2=1.0, eta=eta, delta=delta, r=r)


def profit_gap(params: ModelParams, target: str) -> float:
    """Steady profit under the per-dose subsidy minus that under the technology subsidy."""
    attr = {"government": "pi_G", "manufacturer": "pi_M"}[target]
    return getattr(steady_state(S, params), attr) - getattr(steady_state(T, params), attr)


def find_beta_crossing(rho: float, delta: float, eta: float = 1e5, r: float = 1e-6,
                       target: str = "government", alpha: float = 18.0, bracket=None,
                       tol: float = 1e-6, max_iter: int = 80) -> ThresholdResult:
    """Bisect on beta for the sign change of the steady profit gap (S minus T)."""
    if target not in THRESHOLD_CONSTANTS:
        raise ValueError(f"target must be one of {sorted(THRESHOLD_CONSTANTS)}")
    scale = rho**2 / delta**2
    if bracket is None:
        # just inside the stability region up to well past either constant
        lo = 1.05 * 5 * rho**2 / (8 * delta * (r + delta))
        bracket = (lo, 4 * scale)
    lo, hi = map(float, bracket)

    def f(beta):
        return profit_gap(symmetric_params(rho, delta, beta, eta, r, alpha), target)

    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo < 0 < f_hi or f_hi < 0 < f_lo):
        raise ValueError(f"no sign change on [{lo:g}, {hi:g}]: gap values {f_lo:.6g}, {f_hi:.6g}")
    ends = (f_lo, f_hi)
    it = 0
    while hi - lo > tol and it < max_iter:
        it += 1
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    crossing = 0.5 * (lo + hi)
    analytic = THRESHOLD_CONSTANTS[target] * scale
    return ThresholdResult(target=target, crossing=crossing, bracket=(lo, hi), analytic=analytic,
                           rel_gap=abs(crossing - analytic) / analytic, iterations=it,
                           endpoint_values=ends)


def crossing_r_drift(rho: float, delta: float, target: str = "government",
                     r_values=(1e-6, 1e-5), **kwargs) -> tuple[list[ThresholdResult], float]:
    """Crossings at several discount rates and their largest relative spread."""
    results = [find_beta_crossing(rho, delta, r=r, target=target, **kwargs) for r in r_values]
    xs = [res.crossing for res in results]
    return results, (max(xs) - min(xs)) / min(xs)


# ----------------------------------------------------------------------------
# blockchain effect
# ----------------------------------------------------------------------------

BLOCKCHAIN_QUANTITIES = ("q", "b", "a", "Q", "G", "D", "omega", "p")


@dataclass
class BlockchainReport:
    larger: dict[str, bool]
    crossover_time: float | None
    pi_M_gap_end: float
    b_increasing_in_theta2: bool | None = None


def _value_at(params, qty, x):
    grid = [0.0] if x == 0 else [0.0, x]
    return float(getattr(trajectory(N, params, grid), qty)[-1])


def blockchain_impact(params: ModelParams, grid, theta2_values=None) -> BlockchainReport:
    """No-subsidy paths with the given theta2 against the same model with theta2 = 0."""
    if params.theta2 <= 0:
        raise ValueError("blockchain comparison needs theta2 > 0")
    t = np.asarray(grid, dtype=float)
    plain = params.replace(theta2=0.0)
    with_bc = trajectory(N, params, t)
    without = trajectory(N, plain, t)
    later = t > 0
    larger = {qty: bool(np.all(getattr(with_bc, qty)[later] > getattr(without, qty)[later]))
              for qty in BLOCKCHAIN_QUANTITIES}

    gap = with_bc.pi_M - without.pi_M
    crossover = None
    if gap[-1] > 0:
        neg = np.nonzero(gap <= 0)[0]
        if neg.size == 0:
            crossover = 0.0
        else:
            i = int(neg[-1])

            def g(x):
                return _value_at(params, "pi_M", x) - _value_at(plain, "pi_M", x)

            crossover = float(brentq(g, t[i], t[i + 1], xtol=1e-12))
    report = BlockchainReport(larger=larger, crossover_time=crossover, pi_M_gap_end=float(gap[-1]))
    if theta2_values is not None:
        bs = [trajectory(N, params.replace(theta2=float(v)), t).b for v in sorted(theta2_values)]
        report.b_increasing_in_theta2 = all(np.all(b2[later] > b1[later]) for b1, b2 in zip(bs, bs[1:]))
    return report


# ----------------------------------------------------------------------------
# proposition ledger
# ----------------------------------------------------------------------------

@dataclass
class PropCheck:
    prop: str
    statement: str
    precondition: str
    precondition_holds: bool
    holds: bool
    detail: str = ""

    @property
    def status(self) -> str:
        if not self.precondition_holds:
            return "skipped"
        return "pass" if self.holds else "fail"


def prop14_eta_threshold(params: ModelParams) -> float:
    """eta above which the per-dose subsidy sells more than no subsidy in the long run."""
    p = params
    kappa = 8 * p.beta * p.delta * p.rd
    dlt = compute_delta(p)
    return p.alpha * (2 * kappa + dlt) / (2 * p.beta * (kappa - dlt))


def proposition_suite(params: ModelParams, tau: float | None = None,
                      large_eta_factor: float = 2.0) -> list[PropCheck]:
    """Evaluate every checkable steady-state and early-time inequality.

    Each entry records whether its precondition holds and, separately, whether
    the inequality itself holds; checks whose inputs are infeasible are skipped.
    """
    p = params
    feasible = {}
    for pol in DYNAMIC_POLICIES:
        try:
            saddle_path(pol, p)
            feasible[pol] = True
        except InfeasibleError:
            feasible[pol] = False
    ss = {pol: steady_state(pol, p) for pol in DYNAMIC_POLICIES if feasible[pol]}
    if tau is None and all(feasible.values()):
        tau = early_time(p)
    early = {}
    if tau is not None:
        early = {pol: trajectory(pol, p, [0.0, tau]).snapshot(1) for pol in ss}

    checks: list[PropCheck] = []

    def add(prop, statement, pre_text, pre_ok, needs, fn):
        ok_inputs = all(feasible[x] for x in needs) and (tau is not None or "tau" not in statement)
        if not ok_inputs:
            checks.append(PropCheck(prop, statement, pre_text + " [inputs infeasible]", False, False))
            return
        holds, detail = fn()
        checks.append(PropCheck(prop, statement, pre_text, bool(pre_ok), bool(holds), detail))

    n_, t_, s_ = ss.get(N), ss.get(T), ss.get(S)
    thr_T = eta_threshold_T(p)
    interior_T = f"eta={p.eta:.6g} >= {thr_T:.6g} (technology subsidy interior)"
    thr14 = prop14_eta_threshold(p)
    big_eta = large_eta_factor * thr14
    big_eta_txt = f"eta={p.eta:.6g} > {big_eta:.6g} ({large_eta_factor:g} x demand threshold)"

    add("9(1)", "pi_G^T(inf) >= pi_G^*(inf)", interior_T, p.eta >= thr_T, (N, T),
        lambda: (t_.pi_G >= n_.pi_G, f"{t_.pi_G:.6g} vs {n_.pi_G:.6g}"))
    add("9(2)", "pi_G^S(inf) > pi_G^*(inf)", big_eta_txt, p.eta > big_eta, (N, S),
        lambda: (s_.pi_G > n_.pi_G, f"{s_.pi_G:.6g} vs {n_.pi_G:.6g}"))
    add("10(1)", "pi_M^T(inf) >= pi_M^*(inf)", interior_T, p.eta >= thr_T, (N, T),
        lambda: (t_.pi_M >= n_.pi_M, f"{t_.pi_M:.6g} vs {n_.pi_M:.6g}"))
    add("10(2)", "pi_M^S(inf) > pi_M^*(inf)", big_eta_txt, p.eta > big_eta, (N, S),
        lambda: (s_.pi_M > n_.pi_M, f"{s_.pi_M:.6g} vs {n_.pi_M:.6g}"))
    add("11(1)", "q^T >= q^*, b^T >= b^*, a^T >= a^* at inf", interior_T, p.eta >= thr_T, (N, T),
        lambda: (t_.q >= n_.q and t_.b >= n_.b and t_.a >= n_.a,
                 f"q {t_.q:.6g}/{n_.q:.6g} b {t_.b:.6g}/{n_.b:.6g} a {t_.a:.6g}/{n_.a:.6g}"))
    thr_S = eta_threshold_S(p)
    both = f"eta >= {max(thr_T, thr_S):.6g} (both subsidies interior)"
    add("11(2)", "q^T(inf) > q^S(inf)", both, p.eta >= max(thr_T, thr_S), (T, S),
        lambda: (t_.q > s_.q, f"{t_.q:.6g} vs {s_.q:.6g}"))
    add("12(1)", "A^T(inf) >= A^*(inf)", interior_T, p.eta >= thr_T, (N, T),
        lambda: (t_.A >= n_.A, f"{t_.A:.6g} vs {n_.A:.6g}"))
    kappa = 8 * p.beta * p.delta * p.rd
    n_ratio = compute_delta(p) / kappa
    tech = p.gamma1**2 * p.theta1**2
    lhs = (6 - n_ratio) / (1 - n_ratio) if n_ratio < 1 else math.nan
    rhs = p.gamma2**2 * (2 * p.theta2**2 + p.theta3**2) / tech if tech > 0 else math.inf
    add("12(2)", "A^T(inf) > A^S(inf)",
        f"n={n_ratio:.6g}; (6-n)/(1-n)={lhs:.6g} > {rhs:.6g}", 0 < n_ratio < 1 and lhs > rhs, (T, S),
        lambda: (t_.A > s_.A, f"{t_.A:.6g} vs {s_.A:.6g}"))
    e = early
    add("13(1)", f"p^S < p^* < p^T and omega^S < omega^* < omega^T at tau={tau}", both,
        p.eta >= max(thr_T, thr_S), (N, T, S),
        lambda: (e[S].p < e[N].p < e[T].p and e[S].omega < e[N].omega < e[T].omega,
                 f"p {e[S].p:.6g}<{e[N].p:.6g}<{e[T].p:.6g}; "
                 f"omega {e[S].omega:.6g}<{e[N].omega:.6g}<{e[T].omega:.6g}"))
    add("13(2)", "p^S < p^* <= p^T and omega^S < omega^* <= omega^T at inf", both,
        p.eta >= max(thr_T, thr_S), (N, T, S),
        lambda: (s_.p < n_.p <= t_.p and s_.omega < n_.omega <= t_.omega,
                 f"p {s_.p:.6g}<{n_.p:.6g}<={t_.p:.6g}; omega {s_.omega:.6g}<{n_.omega:.6g}<={t_.omega:.6g}"))
    add("14(1)", f"D^S > D^T > D^* at tau={tau}", both, p.eta >= max(thr_T, thr_S), (N, T, S),
        lambda: (e[S].D > e[T].D > e[N].D, f"{e[S].D:.6g} > {e[T].D:.6g} > {e[N].D:.6g}"))
    add("14(2)", "D^T(inf) >= D^*(inf)", interior_T, p.eta >= thr_T, (N, T),
        lambda: (t_.D >= n_.D, f"{t_.D:.6g} vs {n_.D:.6g}"))
    add("14(3)", "D^S(inf) > D^*(inf)", f"eta={p.eta:.6g} > {thr14:.6g}", p.eta > thr14, (N, S),
        lambda: (s_.D > n_.D, f"{s_.D:.6g} vs {n_.D:.6g}"))
    return checks
