"""Open-loop equilibrium consumption-investment strategies for the
Merton problem under general (non-exponential) discounting, with
numerical equilibrium verification."""

from .closedform import (
    EquilibriumPolicy,
    ExpCoefficients,
    LogCoefficients,
    PowerCoefficients,
    solve_exponential,
    solve_log,
    solve_policy,
    solve_power,
)
from .compare import (
    ComparisonPolicy,
    classical_merton,
    karp_openloop,
    naive_log_consumption,
    solano_feedback_log,
    solano_feedback_power,
)
from .config import RunConfig, load_config, parse_config
from .discount import DiscountFunction, Exponential, Hyperbolic, KarpRate, Mixture
from .errors import (
    ConvergenceError,
    DegeneracyError,
    DomainError,
    EllipticityError,
    MertonEqError,
    SolverError,
    ValidationError,
)
from .grid import TimeGrid
from .market import MarketModel
from .pde import ThetaSurface, policy_from_theta, solve_theta
from .simulate import (
    ObjectiveEstimate,
    ScaledConsumptionPolicy,
    SpikePolicy,
    WealthPaths,
    estimate_objective,
    normal_increments,
    simulate_paths,
)
from .utility import ExponentialUtility, LogUtility, PowerUtility, Utility
from .verify import (
    AdjointEstimate,
    EquilibriumReport,
    SecondOrderAdjoint,
    SpikeResult,
    estimate_p_diagonal,
    nested_diagonal_check,
    residual_conditions,
    second_order_form,
    spike_test,
    theta_adjoint,
    verify_equilibrium,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
