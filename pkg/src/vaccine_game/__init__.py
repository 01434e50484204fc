"""Open-loop equilibria of a government-manufacturer-retailer vaccine supply chain game."""

__version__ = "0.1.0"

from .params import (  # noqa: E402
    BASELINE,
    DYNAMIC_POLICIES,
    FeasibilityReport,
    InfeasibleError,
    ModelParams,
    Policy,
    RegimeError,
    compute_delta,
    validate,
)
from .equilibrium import (  # noqa: E402
    ReducedSystem,
    Snapshot,
    SteadyState,
    demand,
    efforts_from_costate,
    prices_from_state,
    profit_rates,
    reduced_system,
    steady_state,
    subsidy_control,
)
from .dynamics import (  # noqa: E402
    SaddlePath,
    TimeSeries,
    customer_p_response,
    discounted_value,
    saddle_path,
    trajectory,
)
from .oracle import ConvergenceError, OracleConfig, OracleResult, oracle_check, solve_bvp  # noqa: E402
