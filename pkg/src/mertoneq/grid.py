"""Uniform time grid and quadrature helpers.

All coefficient curves in this package live on a uniform grid over [0, T]
and are linearly interpolated between nodes.  Integrals of node-sampled
curves use composite Simpson rules (4th order) so that downstream
closed-form solvers hit the tolerances the test suite pins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import DomainError, ValidationError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k*T/n on [0, T]."""

    horizon: float
    steps: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise ValidationError(f"horizon must be positive, got {self.horizon}")
        if self.steps < 1:
            raise ValidationError(f"steps must be a positive integer, got {self.steps}")
        nodes = np.linspace(0.0, self.horizon, self.steps + 1)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def check_time(self, t: float) -> float:
        """Validate t in [0, T] (with roundoff slack) and clamp."""
        if not np.isfinite(t) or t < -1e-12 or t > self.horizon + 1e-12:
            raise DomainError(f"time {t} outside [0, {self.horizon}]")
        return float(min(max(t, 0.0), self.horizon))

    def index_at(self, t: float) -> int:
        """Index of the grid node closest to t; t must be grid-aligned."""
        t = self.check_time(t)
        k = int(round(t / self.dt))
        if abs(t - k * self.dt) > 1e-9 * max(1.0, self.horizon):
            raise DomainError(f"time {t} is not a grid node")
        return k

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.horizon, self.steps * factor)


def interp_nodes(grid: TimeGrid, samples: np.ndarray, t: float) -> np.ndarray:
    """Linear interpolation of node samples (axis 0) at time t."""
    t = grid.check_time(t)
    pos = t / grid.dt
    k = min(int(pos), grid.steps - 1)
    w = pos - k
    return (1.0 - w) * samples[k] + w * samples[k + 1]


def cumulative_integral(samples: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative integral at every node, composite Simpson, starting at 0."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] == 2:
        # single interval: trapezoid is all Simpson can degrade to
        return np.array([0.0, 0.5 * dt * (samples[0] + samples[1])])
    return cumulative_simpson(samples, dx=dt, initial=0.0)


def integral_to_end(samples: np.ndarray, dt: float) -> np.ndarray:
    """Node-wise tail integral: out[k] = integral from t_k to T."""
    cum = cumulative_integral(samples, dt)
    return cum[-1] - cum


def simpson_quad(f, a: float, b: float, panels: int = 256) -> float:
    """Composite Simpson on [a, b] with a fixed, even panel count."""
    if b < a:
        raise DomainError(f"integration bounds reversed: [{a}, {b}]")
    if b == a:
        return 0.0
    m = 2 * max(1, panels // 2)
    x = np.linspace(a, b, m + 1)
    y = np.asarray(f(x), dtype=float)
    h = (b - a) / m
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))
