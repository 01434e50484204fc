"""Model parameters, policy tags and feasibility checks."""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field


class InfeasibleError(ValueError):
    """Parameters violate a condition the equilibrium construction relies on."""

    def __init__(self, message: str, condition: str = ""):
        super().__init__(message)
        self.condition = condition


class RegimeError(InfeasibleError):
    """A subsidy clamp or a control sign constraint binds (boundary regime)."""


class Policy(enum.Enum):
    NO_SUBSIDY = "none"
    MANUFACTURER_Q = "manu-q"
    MANUFACTURER_D = "manu-d"
    CUSTOMER_P = "customer-p"

    @classmethod
    def parse(cls, value: "str | Policy") -> "Policy":
        if isinstance(value, Policy):
            return value
        aliases = {"T": cls.MANUFACTURER_Q, "S": cls.MANUFACTURER_D, "*": cls.NO_SUBSIDY}
        if value in aliases:
            return aliases[value]
        try:
            return cls(value)
        except ValueError:
            names = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown policy {value!r} (expected one of {names})") from None


# policies with their own state/costate dynamics; customer-p rides on no-subsidy
DYNAMIC_POLICIES = (Policy.NO_SUBSIDY, Policy.MANUFACTURER_Q, Policy.MANUFACTURER_D)

PARAM_NAMES = ("alpha", "beta", "theta1", "theta2", "theta3",
               "gamma1", "gamma2", "eta", "delta", "r")

_STRICTLY_POSITIVE = ("alpha", "beta", "delta", "r")


@dataclass(frozen=True)
class ModelParams:
    """Scalars of the three-tier game. Defaults are the numerical-study baseline."""

    alpha: float = 18.0    # market capacity
    beta: float = 7.0      # price sensitivity
    theta1: float = 1.0    # technology effort -> quality
    theta2: float = 0.5    # blockchain effort -> goodwill
    theta3: float = 0.8    # advertising effort -> goodwill
    gamma1: float = 0.3    # quality -> demand
    gamma2: float = 0.2    # goodwill -> demand
    eta: float = 7.0       # government marginal revenue per dose
    delta: float = 0.1     # common decay rate of quality and goodwill
    r: float = 0.03        # discount rate

    def __post_init__(self):
        check_fields(self)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    @property
    def rd(self) -> float:
        """r + delta, the effective discount on shadow prices."""
        return self.r + self.delta


def check_fields(params: ModelParams) -> None:
    for name in PARAM_NAMES:
        value = getattr(params, name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ValueError(f"parameter {name} must be a finite number, got {value!r}")
        if name in _STRICTLY_POSITIVE and value <= 0:
            raise ValueError(f"parameter {name} must be > 0, got {value!r}")
        if value < 0:
            raise ValueError(f"parameter {name} must be >= 0, got {value!r}")


BASELINE = ModelParams()


def compute_delta(params: ModelParams) -> float:
    """Effort-channel strength 2 theta1^2 gamma1^2 + (2 theta2^2 + theta3^2) gamma2^2."""
    p = params
    return 2 * p.theta1**2 * p.gamma1**2 + (2 * p.theta2**2 + p.theta3**2) * p.gamma2**2


def stability_margin(params: ModelParams) -> float:
    """8 beta delta (r + delta) - Delta; positive iff the saddle is well posed."""
    return 8 * params.beta * params.delta * params.rd - compute_delta(params)


def eta_threshold_T(params: ModelParams) -> float:
    """Smallest eta keeping the technology-cost subsidy strictly interior."""
    p = params
    den = 8 * p.beta * p.delta * p.rd - compute_delta(p)
    return math.inf if den <= 0 else 4 * p.alpha * p.delta * p.rd / den


def eta_threshold_S(params: ModelParams) -> float:
    """Smallest eta keeping the per-dose subsidy strictly interior."""
    p = params
    den = 16 * p.beta * p.delta * p.rd - compute_delta(p)
    return math.inf if den <= 0 else 16 * p.alpha * p.delta * p.rd / den


@dataclass
class FeasibilityReport:
    delta_aggregate: float
    stability_ok: bool
    interior_T_ok: bool | None = None
    interior_S_ok: bool | None = None
    messages: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.stability_ok and self.interior_T_ok is not False and self.interior_S_ok is not False

    def raise_if_infeasible(self) -> None:
        if not self.stability_ok:
            raise InfeasibleError("; ".join(self.messages), condition="stability")
        if self.interior_T_ok is False:
            raise InfeasibleError("; ".join(self.messages), condition="interior_T")
        if self.interior_S_ok is False:
            raise InfeasibleError("; ".join(self.messages), condition="interior_S")

    def to_text(self) -> str:
        lines = [f"Delta = {self.delta_aggregate:.12g}",
                 f"stability (8*beta*delta*(r+delta) > Delta): {'ok' if self.stability_ok else 'VIOLATED'}"]
        if self.interior_T_ok is not None:
            lines.append(f"interior technology subsidy (phi > 0): {'ok' if self.interior_T_ok else 'VIOLATED'}")
        if self.interior_S_ok is not None:
            lines.append(f"interior per-dose subsidy (F > 0): {'ok' if self.interior_S_ok else 'VIOLATED'}")
        lines.extend(self.messages)
        return "\n".join(lines)


def validate(params: ModelParams, policy: Policy | str = Policy.NO_SUBSIDY) -> FeasibilityReport:
    """Evaluate stability and, for subsidised policies, the interior-regime bound on eta.

    Raises ValueError naming the offending symbol when a field is non-finite or
    out of its admissible sign range.
    """
    policy = Policy.parse(policy)
    check_fields(params)
    dlt = compute_delta(params)
    lhs = 8 * params.beta * params.delta * params.rd
    report = FeasibilityReport(delta_aggregate=dlt, stability_ok=lhs > dlt)
    if not report.stability_ok:
        report.messages.append(
            f"stability condition 8*beta*delta*(r+delta) > Delta violated: {lhs:.6g} <= {dlt:.6g}")
    if policy is Policy.MANUFACTURER_Q:
        bound = eta_threshold_T(params)
        report.interior_T_ok = report.stability_ok and params.eta >= bound
        if not report.interior_T_ok:
            report.messages.append(
                f"interior condition eta >= 4*alpha*delta*(r+delta)/(8*beta*delta*(r+delta)-Delta) "
                f"violated: eta={params.eta:.6g}, bound={bound:.6g}")
    elif policy is Policy.MANUFACTURER_D:
        bound = eta_threshold_S(params)
        report.interior_S_ok = report.stability_ok and params.eta >= bound
        if not report.interior_S_ok:
            report.messages.append(
                f"interior condition eta >= 16*alpha*delta*(r+delta)/(16*beta*delta*(r+delta)-Delta) "
                f"violated: eta={params.eta:.6g}, bound={bound:.6g}")
    return report
