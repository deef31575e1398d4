"""Discount function families.

Every variant satisfies lambda(0) = 1 and lambda(tau) > 0 on [0, T].
The exponential variant is the time-consistent special case; everything
else makes the planner time-inconsistent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, ValidationError
from .grid import TimeGrid, simpson_quad


class DiscountFunction:
    """Base class: a positive weight lambda(tau) on payoff delay tau."""

    horizon: float

    def value(self, tau):
        raise NotImplementedError

    def __call__(self, tau):
        tau_arr = np.asarray(tau, dtype=float)
        if np.any(~np.isfinite(tau_arr)) or np.any(tau_arr < -1e-12) or np.any(
            tau_arr > self.horizon + 1e-12
        ):
            raise DomainError(f"delay outside [0, {self.horizon}]")
        out = self.value(np.clip(tau_arr, 0.0, self.horizon))
        return float(out) if np.isscalar(tau) or np.ndim(tau) == 0 else out

    def lipschitz_estimate(self, grid: TimeGrid) -> float:
        """Max finite-difference slope of lambda over the grid, reported as
        a numerical stand-in for the Lipschitz constant."""
        vals = self(grid.nodes)
        return float(np.max(np.abs(np.diff(vals))) / grid.dt)


@dataclass(frozen=True)
class Exponential(DiscountFunction):
    """lambda(tau) = exp(-delta0 * tau); delta0 = 0 means no discounting."""

    delta0: float
    horizon: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.delta0) or self.delta0 < 0:
            raise ValidationError(f"exponential discount rate must be >= 0, got {self.delta0}")

    def value(self, tau):
        return np.exp(-self.delta0 * tau)


@dataclass(frozen=True)
class Hyperbolic(DiscountFunction):
    """lambda(tau) = (1 + k*tau)^(-beta)."""

    k: float
    beta: float
    horizon: float

    def __post_init__(self) -> None:
        if self.k <= 0 or self.beta <= 0:
            raise ValidationError(f"hyperbolic parameters must be positive, got k={self.k}, beta={self.beta}")

    def value(self, tau):
        return (1.0 + self.k * tau) ** (-self.beta)


@dataclass(frozen=True)
class Mixture(DiscountFunction):
    """lambda(tau) = sum_i w_i exp(-delta_i * tau), weights on the simplex."""

    weights: tuple
    rates: tuple
    horizon: float

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        d = np.asarray(self.rates, dtype=float)
        if w.shape != d.shape or w.ndim != 1:
            raise ValidationError("mixture weights and rates must be 1-D and of equal length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError("mixture weights must be nonnegative and sum to 1")
        if np.any(d <= 0):
            raise ValidationError("mixture rates must be positive")
        object.__setattr__(self, "weights", tuple(w))
        object.__setattr__(self, "rates", tuple(d))

    def value(self, tau):
        tau = np.asarray(tau, dtype=float)
        w = np.asarray(self.weights)
        d = np.asarray(self.rates)
        return np.exp(-np.multiply.outer(tau, d)) @ w


@dataclass(frozen=True)
class KarpRate(DiscountFunction):
    """Time-varying instantaneous rate: lambda(tau) = exp(-int_0^tau delta)."""

    rate: Callable[[np.ndarray], np.ndarray]
    horizon: float
    quad_panels: int = 256

    def rate_integral(self, tau: float) -> float:
        return simpson_quad(lambda x: np.asarray(self.rate(x), dtype=float), 0.0, float(tau), self.quad_panels)

    def value(self, tau):
        tau = np.asarray(tau, dtype=float)
        if tau.ndim == 0:
            return np.exp(-self.rate_integral(float(tau)))
        return np.exp(-np.array([self.rate_integral(x) for x in tau.ravel()]).reshape(tau.shape))
