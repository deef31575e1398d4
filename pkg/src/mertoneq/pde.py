"""Finite-difference solver for the marginal-value surface theta(t, x).

The surface solves a quasilinear parabolic terminal-value problem

    theta_t + (r0 x - I(lambda theta)) theta_x - rho theta
            + (rho / 2) (theta / theta_x)^2 theta_xx + r0 theta = 0,
    theta(T, x) = h_x(x),

with rho = r' Sigma r the risk-premium quadratic and I the inverse
marginal running utility.  Time stepping is Crank-Nicolson with the
nonlinear coefficients frozen and refreshed by inner iterations.  For
utilities on (0, inf) the scheme works in log wealth, which keeps the
geometric state scale resolved; the exponential utility keeps x-space
since its domain is the whole line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import solve_banded

from .closedform import EquilibriumPolicy
from .discount import DiscountFunction
from .errors import ConvergenceError, DegeneracyError, DomainError, SolverError, ValidationError
from .market import MarketModel
from .utility import Utility

DERIVATIVE_FLOOR = 1e-12
INNER_TOL = 1e-10
INNER_MAX = 50


@dataclass(frozen=True)
class ThetaSurface:
    """Solved surface on the tensor grid (time nodes) x (wealth nodes)."""

    times: np.ndarray
    x: np.ndarray
    theta: np.ndarray     # (n_t, n_x)
    log_space: bool
    residual: float = field(default=np.nan, compare=False)

    @property
    def theta_x(self) -> np.ndarray:
        """Spatial derivative by centered differences on the wealth nodes."""
        if self.log_space:
            xi = np.log(self.x)
            return np.gradient(self.theta, xi, axis=1) / self.x[None, :]
        return np.gradient(self.theta, self.x, axis=1)


def _spatial_nodes(utility: Utility, x_min: float, x_max: float, n_x: int):
    if not (np.isfinite(x_min) and np.isfinite(x_max)) or x_min >= x_max:
        raise ValidationError(f"need x_min < x_max, got [{x_min}, {x_max}]")
    if n_x < 50:
        raise ValidationError(f"need at least 50 wealth nodes, got {n_x}")
    log_space = utility.positive_domain
    if log_space:
        if x_min <= 0:
            raise ValidationError("wealth nodes must be positive for this utility")
        s = np.linspace(np.log(x_min), np.log(x_max), n_x)
        return np.exp(s), s, log_space
    s = np.linspace(x_min, x_max, n_x)
    return s, s, log_space


def _frozen_coefficients(theta_row, s, x, t, market, discount, utility, log_space):
    """Diffusion / advection coefficients of the linearized operator.

    Returns (diff, adv, reac) such that L theta = diff * theta_ss
    + adv * theta_s + reac * theta in the working coordinate s.
    """
    h = s[1] - s[0]
    dtheta = np.empty_like(theta_row)
    dtheta[1:-1] = (theta_row[2:] - theta_row[:-2]) / (2.0 * h)
    dtheta[0] = (theta_row[1] - theta_row[0]) / h
    dtheta[-1] = (theta_row[-1] - theta_row[-2]) / h
    if np.any(np.abs(dtheta) < DERIVATIVE_FLOOR):
        raise DegeneracyError(
            f"theta_x fell below {DERIVATIVE_FLOOR:g} at t={t:.6g}; "
            "the investment ratio theta/theta_x is not defined"
        )
    lam = float(discount(market.grid.horizon - t))
    y = lam * theta_row
    if utility.positive_domain and np.any(y <= 0):
        raise SolverError(f"theta lost positivity at t={t:.6g}")
    cons = utility.inverse_marginal(y)
    rho = market.risk_premium_quadratic(t)
    r0 = market.riskless_rate(t)
    ratio2 = (theta_row / dtheta) ** 2
    if log_space:
        # theta_x = theta_s / x, theta_xx = (theta_ss - theta_s) / x^2
        diff = 0.5 * rho * ratio2
        adv = r0 - cons / x - diff
        reac = np.full_like(theta_row, r0 - rho)
    else:
        diff = 0.5 * rho * ratio2
        adv = r0 * x - cons
        reac = np.full_like(theta_row, r0 - rho)
    return diff, adv, reac


def _apply_operator(theta_row, diff, adv, reac, h):
    out = np.zeros_like(theta_row)
    out[1:-1] = (
        diff[1:-1] * (theta_row[2:] - 2.0 * theta_row[1:-1] + theta_row[:-2]) / h**2
        + adv[1:-1] * (theta_row[2:] - theta_row[:-2]) / (2.0 * h)
        + reac[1:-1] * theta_row[1:-1]
    )
    return out


def _closed_form_boundaries(market, discount, utility, x_lo, x_hi):
    """Dirichlet data from the separable closed forms, when the utility
    admits one; otherwise None (zero-curvature extrapolation is used)."""
    try:
        from .closedform import solve_policy
        policy = solve_policy(market, discount, utility)
    except (SolverError, ValidationError):
        return None
    return (lambda t: float(policy.theta(t, x_lo)),
            lambda t: float(policy.theta(t, x_hi)))


def solve_theta(
    market: MarketModel,
    discount: DiscountFunction,
    utility: Utility,
    x_min: float,
    x_max: float,
    n_x: int,
    boundary_low: Optional[Callable[[float], float]] = None,
    boundary_high: Optional[Callable[[float], float]] = None,
) -> ThetaSurface:
    """Crank-Nicolson time march of the marginal-value surface.

    ``boundary_low`` / ``boundary_high`` supply Dirichlet values at the
    wealth-box edges for every time node.  When omitted, the separable
    closed form of the utility provides them; for utilities without one
    the boundary rows are closed by zero second derivative in the
    working coordinate.
    """
    x, s, log_space = _spatial_nodes(utility, x_min, x_max, n_x)
    grid = market.grid
    nodes = grid.nodes
    dt = grid.dt
    h = s[1] - s[0]
    m = n_x
    if boundary_low is None or boundary_high is None:
        pair = _closed_form_boundaries(market, discount, utility, x[0], x[-1])
        if pair is not None:
            boundary_low, boundary_high = pair
    extrapolate = boundary_low is None or boundary_high is None
    theta = np.empty((nodes.size, m))
    theta[-1] = utility.h_x(x)
    for n in range(nodes.size - 2, -1, -1):
        t_new, t_old = nodes[n], nodes[n + 1]
        old = theta[n + 1]
        coef_old = _frozen_coefficients(old, s, x, t_old, market, discount, utility, log_space)
        explicit = old + 0.5 * dt * _apply_operator(old, *coef_old, h)
        if not extrapolate:
            lo, hi = float(boundary_low(t_new)), float(boundary_high(t_new))
        guess = old.copy()
        for _ in range(INNER_MAX):
            diff, adv, reac = _frozen_coefficients(
                guess, s, x, t_new, market, discount, utility, log_space
            )
            if extrapolate:
                lo = 2.0 * guess[1] - guess[2]
                hi = 2.0 * guess[-2] - guess[-3]
            lower = diff / h**2 - adv / (2.0 * h)
            upper = diff / h**2 + adv / (2.0 * h)
            center = -2.0 * diff / h**2 + reac
            ab = np.zeros((3, m - 2))
            ab[0, 1:] = -0.5 * dt * upper[1:-2]
            ab[1, :] = 1.0 - 0.5 * dt * center[1:-1]
            ab[2, :-1] = -0.5 * dt * lower[2:-1]
            rhs = explicit[1:-1].copy()
            rhs[0] += 0.5 * dt * lower[1] * lo
            rhs[-1] += 0.5 * dt * upper[-2] * hi
            new = np.empty(m)
            new[0], new[-1] = lo, hi
            new[1:-1] = solve_banded((1, 1), ab, rhs)
            if extrapolate:
                new[0] = 2.0 * new[1] - new[2]
                new[-1] = 2.0 * new[-2] - new[-3]
            gap = float(np.max(np.abs(new - guess)))
            guess = new
            if gap <= INNER_TOL * max(1.0, float(np.max(np.abs(new)))):
                break
        else:
            raise ConvergenceError(
                f"coefficient iteration stalled at t={t_new:.6g} (gap {gap:.3e} "
                f"after {INNER_MAX} sweeps)"
            )
        theta[n] = guess
    residual = _interior_residual(theta, nodes, s, x, market, discount, utility, log_space)
    return ThetaSurface(nodes.copy(), x, theta, log_space, residual)


def _interior_residual(theta, nodes, s, x, market, discount, utility, log_space) -> float:
    """Sup-norm of the PDE residual on interior nodes (diagnostic only)."""
    res = 0.0
    h = s[1] - s[0]
    dtheta_t = np.gradient(theta, nodes, axis=0)
    for n in range(1, nodes.size - 1):
        coef = _frozen_coefficients(theta[n], s, x, nodes[n], market, discount, utility, log_space)
        interior = dtheta_t[n] + _apply_operator(theta[n], *coef, h)
        res = max(res, float(np.max(np.abs(interior[1:-1]))))
    return res


def policy_from_theta(
    surface: ThetaSurface,
    market: MarketModel,
    discount: DiscountFunction,
    utility: Utility,
) -> EquilibriumPolicy:
    """Feedback policy induced by a solved surface.

    Consumption is I(lambda(T - t) theta); investment is
    -Sigma r theta / theta_x.  Queries are bilinear in (t, x) and must
    stay inside the solved box.
    """
    T = market.grid.horizon
    interp_theta = RegularGridInterpolator(
        (surface.times, surface.x), surface.theta, bounds_error=True
    )
    interp_theta_x = RegularGridInterpolator(
        (surface.times, surface.x), surface.theta_x, bounds_error=True
    )

    def _eval(interp, t, x):
        x = np.asarray(x, dtype=float)
        pts = np.stack([np.broadcast_to(t, x.shape), x], axis=-1)
        try:
            vals = interp(pts)
        except ValueError as exc:
            raise DomainError(f"query outside the solved surface box: {exc}") from exc
        return float(np.asarray(vals).ravel()[0]) if x.ndim == 0 else vals

    def theta(t, x):
        return _eval(interp_theta, t, x)

    def theta_x(t, x):
        return _eval(interp_theta_x, t, x)

    def consumption(t, x):
        return utility.inverse_marginal(float(discount(T - t)) * theta(t, x))

    def investment(t, x):
        th = np.asarray(theta(t, x), dtype=float)
        thx = np.asarray(theta_x(t, x), dtype=float)
        if np.any(np.abs(thx) < DERIVATIVE_FLOOR):
            raise DegeneracyError("theta_x vanished at the query point")
        vec = market.gram_inverse(t) @ market.excess_return(t)
        ratio = -th / thx
        return np.multiply.outer(ratio, vec) if ratio.ndim else ratio * vec

    return EquilibriumPolicy("pde", utility, consumption, investment, theta, theta_x)
