"""Equilibrium coefficient curves and strategies for the three solvable utilities.

The power, log and exponential utilities reduce the verification PDE to
ODEs whose solutions are plain quadratures over the time grid.  The
resulting policies are feedback maps (t, x) -> (consumption, investment)
together with the separable theta surface and its spatial derivative,
which the verification module uses as its algebraic adjoint shortcut.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .discount import DiscountFunction
from .errors import DomainError, SolverError
from .grid import TimeGrid, cumulative_integral, integral_to_end
from .market import MarketModel
from .utility import ExponentialUtility, LogUtility, PowerUtility, Utility


def curve_at(grid: TimeGrid, values: np.ndarray, t: float) -> float:
    """Linear interpolation of a node-sampled curve."""
    t = grid.check_time(t)
    return float(np.interp(t, grid.nodes, values))


def _centered_residual(grid: TimeGrid, values: np.ndarray, rhs: np.ndarray) -> float:
    """Sup-norm of d(values)/dt + rhs, centered differences inside, one-sided at ends."""
    dt = grid.dt
    deriv = np.gradient(values, dt, edge_order=2)
    return float(np.max(np.abs(deriv + rhs)))


# ---------------------------------------------------------------------------
# coefficient curves


@dataclass(frozen=True)
class PowerCoefficients:
    """Curves K, Q, y and Pi for the power-utility reduction; Pi(T) = 1."""

    grid: TimeGrid
    K: np.ndarray
    Qc: np.ndarray
    y: np.ndarray
    Pi: np.ndarray
    gamma: float
    ode_residual: float = field(default=np.nan, compare=False)


@dataclass(frozen=True)
class LogCoefficients:
    """Single curve varphi with varphi(T) = 1."""

    grid: TimeGrid
    varphi: np.ndarray
    ode_residual: float = field(default=np.nan, compare=False)


@dataclass(frozen=True)
class ExpCoefficients:
    """Curves phi (phi(T) = 1) and psi (psi(T) = 0)."""

    grid: TimeGrid
    phi: np.ndarray
    psi: np.ndarray
    ode_residual: float = field(default=np.nan, compare=False)


def power_rate_curves(m: MarketModel, d: DiscountFunction, a: float, gamma: float):
    """Node samples of K(t) and Q(t) entering the power-utility ODE."""
    nodes = m.grid.nodes
    lam = np.asarray(d(m.grid.horizon - nodes), dtype=float)
    K = gamma * m.r0 + 0.5 * gamma / (1.0 - gamma) * m.risk_premium_nodes()
    Qc = (1.0 - gamma) * (a * lam) ** (1.0 / (gamma - 1.0))
    return K, Qc


def solve_power(m: MarketModel, d: DiscountFunction, a: float, gamma: float) -> PowerCoefficients:
    """Quadrature solution of the power-utility coefficient ODE.

    Uses the variation-of-constants representation of the substituted
    linear ODE for y = Pi^{1/(1-gamma)}, then maps back to Pi.
    """
    PowerUtility(a, gamma)  # parameter validation
    grid = m.grid
    dt = grid.dt
    K, Qc = power_rate_curves(m, d, a, gamma)
    tail_K = integral_to_end(K, dt)
    decay = np.exp(tail_K / (gamma - 1.0))
    integrand = Qc / (gamma - 1.0) * decay
    tail_int = integral_to_end(integrand, dt)
    y = (1.0 - tail_int) * np.exp(-tail_K / (gamma - 1.0))
    if np.any(y <= 0):
        bad = grid.nodes[np.argmax(y <= 0)]
        raise SolverError(f"power coefficient curve lost positivity at t={bad:.6g}")
    Pi = y ** (1.0 - gamma)
    residual = _centered_residual(grid, Pi, (K + Qc * Pi ** (1.0 / (gamma - 1.0))) * Pi)
    return PowerCoefficients(grid, K, Qc, y, Pi, gamma, residual)


def solve_log(m: MarketModel, d: DiscountFunction, a: float) -> LogCoefficients:
    """varphi(t) = 1 + int_t^T dr / (a * lambda(T - r))."""
    LogUtility(a)
    grid = m.grid
    lam = np.asarray(d(grid.horizon - grid.nodes), dtype=float)
    varphi = 1.0 + integral_to_end(1.0 / (a * lam), grid.dt)
    residual = _centered_residual(grid, varphi, 1.0 / (a * lam))
    return LogCoefficients(grid, varphi, residual)


def solve_exponential(m: MarketModel, d: DiscountFunction, a: float, gamma: float) -> ExpCoefficients:
    """Explicit phi and psi curves for the exponential-utility reduction."""
    ExponentialUtility(a, gamma)
    grid = m.grid
    dt = grid.dt
    lam = np.asarray(d(grid.horizon - grid.nodes), dtype=float)
    tail_r0 = integral_to_end(m.r0, dt)
    e_tail = np.exp(tail_r0)
    phi = e_tail / (1.0 + integral_to_end(e_tail, dt))
    rpq = m.risk_premium_nodes()
    g = phi * np.log(a * lam) / gamma + rpq / (2.0 * gamma) - m.r0 / gamma
    cum_phi = cumulative_integral(phi, dt)
    psi = np.exp(cum_phi) * integral_to_end(g * np.exp(-cum_phi), dt)
    res_phi = _centered_residual(grid, phi, m.r0 * phi - phi**2)
    res_psi = _centered_residual(grid, psi, g - phi * psi)
    return ExpCoefficients(grid, phi, psi, max(res_phi, res_psi))


# ---------------------------------------------------------------------------
# policies


@dataclass(frozen=True)
class EquilibriumPolicy:
    """Feedback maps backing an equilibrium strategy.

    ``consumption(t, x)`` maps a scalar time and scalar/array wealth to the
    consumption rate; ``investment(t, x)`` returns the risky allocation with
    a trailing asset axis.  ``theta`` / ``theta_x`` expose the separable
    surface (or a PDE surface) used by the verification module.
    """

    tag: str
    utility: Utility
    consumption: Callable
    investment: Callable
    theta: Optional[Callable] = None
    theta_x: Optional[Callable] = None


def _check_positive_wealth(x):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DomainError("wealth must be strictly positive for this utility")
    return x


def _outer(x, vec: np.ndarray):
    """x * vec with a trailing asset axis; scalar x gives shape (d,)."""
    x = np.asarray(x, dtype=float)
    return np.multiply.outer(x, vec) if x.ndim else x * vec


def _broadcast_vec(x, vec: np.ndarray):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return vec.copy()
    return np.broadcast_to(vec, x.shape + vec.shape).copy()


def policy_power(
    c: PowerCoefficients, m: MarketModel, d: DiscountFunction, a: float, gamma: float
) -> EquilibriumPolicy:
    grid = c.grid
    T = grid.horizon

    def consumption(t, x):
        x = _check_positive_wealth(x)
        frac = (a * d(T - t) * curve_at(grid, c.Pi, t)) ** (1.0 / (gamma - 1.0))
        return frac * x

    def investment(t, x):
        x = _check_positive_wealth(x)
        vec = m.gram_inverse(t) @ m.excess_return(t) / (1.0 - gamma)
        return _outer(x, vec)

    def theta(t, x):
        return a * curve_at(grid, c.Pi, t) * _check_positive_wealth(x) ** (gamma - 1.0)

    def theta_x(t, x):
        return a * (gamma - 1.0) * curve_at(grid, c.Pi, t) * _check_positive_wealth(x) ** (gamma - 2.0)

    return EquilibriumPolicy("power", PowerUtility(a, gamma), consumption, investment, theta, theta_x)


def policy_log(c: LogCoefficients, m: MarketModel, d: DiscountFunction, a: float) -> EquilibriumPolicy:
    grid = c.grid
    T = grid.horizon

    def consumption(t, x):
        x = _check_positive_wealth(x)
        return x / (a * d(T - t) * curve_at(grid, c.varphi, t))

    def investment(t, x):
        x = _check_positive_wealth(x)
        vec = m.gram_inverse(t) @ m.excess_return(t)
        return _outer(x, vec)

    def theta(t, x):
        return curve_at(grid, c.varphi, t) * a / _check_positive_wealth(x)

    def theta_x(t, x):
        return -curve_at(grid, c.varphi, t) * a / _check_positive_wealth(x) ** 2

    return EquilibriumPolicy("log", LogUtility(a), consumption, investment, theta, theta_x)


def policy_exponential(
    c: ExpCoefficients, m: MarketModel, d: DiscountFunction, a: float, gamma: float
) -> EquilibriumPolicy:
    grid = c.grid
    T = grid.horizon

    def consumption(t, x):
        x = np.asarray(x, dtype=float)
        return (
            -np.log(a * d(T - t)) / gamma
            + curve_at(grid, c.phi, t) * x
            + curve_at(grid, c.psi, t)
        )

    def investment(t, x):
        vec = m.gram_inverse(t) @ m.excess_return(t) / (gamma * curve_at(grid, c.phi, t))
        return _broadcast_vec(x, vec)

    def theta(t, x):
        x = np.asarray(x, dtype=float)
        return a * np.exp(-gamma * (curve_at(grid, c.phi, t) * x + curve_at(grid, c.psi, t)))

    def theta_x(t, x):
        return -gamma * curve_at(grid, c.phi, t) * theta(t, x)

    return EquilibriumPolicy(
        "exponential", ExponentialUtility(a, gamma), consumption, investment, theta, theta_x
    )


def solve_policy(m: MarketModel, d: DiscountFunction, u: Utility) -> EquilibriumPolicy:
    """Dispatch on the utility family and build its closed-form policy."""
    if isinstance(u, PowerUtility):
        return policy_power(solve_power(m, d, u.a, u.gamma), m, d, u.a, u.gamma)
    if isinstance(u, LogUtility):
        return policy_log(solve_log(m, d, u.a), m, d, u.a)
    if isinstance(u, ExponentialUtility):
        return policy_exponential(solve_exponential(m, d, u.a, u.gamma), m, d, u.a, u.gamma)
    raise SolverError(f"no closed form for utility {type(u).__name__}; use the PDE solver")
