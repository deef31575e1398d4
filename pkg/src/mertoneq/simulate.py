"""Seeded Monte Carlo simulation of wealth paths and objective estimates.

Randomness is counter-based: each path owns a Philox stream keyed by
(seed, path index), so draws are independent of execution order and of
how many workers process the path blocks.  The time stepper integrates
the riskless-rate term exactly (exponential integrating factor) and the
control terms with left-endpoint Euler increments, so a noiseless,
consumptionless run reproduces the growth factor to machine precision.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numpy.random import Generator, Philox

from .errors import DomainError, ValidationError
from .market import MarketModel
from .utility import Utility

X_FLOOR_DEFAULT = 1e-8
_BATCH = 8192


def normal_increments(seed: int, n_paths: int, n_steps: int, d: int) -> np.ndarray:
    """Brownian-increment factors N(0,1), shape (n_paths, n_steps, d).

    Path p draws from Philox keyed by (seed, p); the array is a pure
    function of (seed, n_steps, d) per path, so any partition of paths
    across workers reproduces it bit for bit.
    """
    out = np.empty((n_paths, n_steps, d))
    base = int(seed) << 64
    for p in range(n_paths):
        gen = Generator(Philox(key=base + p))
        out[p] = gen.standard_normal((n_steps, d))
    return out


@dataclass(frozen=True)
class WealthPaths:
    """Simulated wealth paths on the grid nodes from start_index to T.

    Paths that leave the admissible wealth domain (for positive-domain
    utilities) are flagged, frozen at their last admissible value, and
    excluded from estimates.
    """

    market: MarketModel
    start_index: int
    X: np.ndarray          # (n_paths, n_nodes)
    consumption: np.ndarray
    investment: np.ndarray  # (n_paths, n_nodes, d)
    increments: np.ndarray  # (n_paths, n_steps, d), retained for CRN reuse
    flagged: np.ndarray     # (n_paths,) bool

    @property
    def n_paths(self) -> int:
        return self.X.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.market.grid.nodes[self.start_index:]

    @property
    def flagged_fraction(self) -> float:
        return float(self.flagged.mean())


@dataclass(frozen=True)
class ObjectiveEstimate:
    """Monte Carlo estimate of the discounted objective J(t, x, u)."""

    mean: float
    stderr: float
    n_paths: int
    n_flagged: int
    t: float
    x: float


@dataclass(frozen=True)
class SpikePolicy:
    """Base strategy plus an additive offset v on [t0, t0 + eps)."""

    base: object
    t0: float
    eps: float
    v: np.ndarray  # (d+1,): consumption offset then investment offsets

    def _active(self, t: float) -> bool:
        # the node at t0 itself is always perturbed, even for eps below one step
        return self.t0 - 1e-12 <= t < self.t0 + max(self.eps, 1e-12)

    @property
    def utility(self) -> Utility:
        return self.base.utility

    def consumption(self, t, x):
        c = self.base.consumption(t, x)
        return c + self.v[0] if self._active(t) else c

    def investment(self, t, x):
        u = self.base.investment(t, x)
        return u + self.v[1:] if self._active(t) else u


@dataclass(frozen=True)
class ScaledConsumptionPolicy:
    """Deliberately non-equilibrium variant: consumption times a factor."""

    base: object
    factor: float

    @property
    def utility(self) -> Utility:
        return self.base.utility

    def consumption(self, t, x):
        return self.factor * self.base.consumption(t, x)

    def investment(self, t, x):
        return self.base.investment(t, x)


def _simulate_block(policy, market: MarketModel, k0: int, x0: np.ndarray,
                    increments: np.ndarray, x_floor: float):
    grid = market.grid
    nodes = grid.nodes
    dt = grid.dt
    steps = grid.steps - k0
    n = increments.shape[0]
    d = market.n_assets
    X = np.empty((n, steps + 1))
    C = np.zeros((n, steps + 1))
    U = np.zeros((n, steps + 1, d))
    X[:, 0] = x0
    alive = np.ones(n, dtype=bool)
    positive = policy.utility.positive_domain
    for j in range(steps):
        t = nodes[k0 + j]
        x = X[:, j]
        if positive:
            alive &= x > x_floor
        idx = np.flatnonzero(alive)
        if idx.size:
            c = np.asarray(policy.consumption(t, x[idx]), dtype=float)
            u = np.asarray(policy.investment(t, x[idx]), dtype=float).reshape(idx.size, d)
            C[idx, j] = c
            U[idx, j] = u
            # consumption outside phi's domain flags the path from here on
            bad = ~policy.utility.admissible(c)
            if np.any(bad):
                alive[idx[bad]] = False
                idx = idx[~bad]
        if idx.size:
            r = market.excess_return(t)
            sig = market.sigma_at(t)
            dw = increments[idx, j, :] * np.sqrt(dt)
            drift = (U[idx, j] @ r - C[idx, j]) * dt
            noise = (U[idx, j] @ sig * dw).sum(axis=1)
            growth = market.growth_factor(t, nodes[k0 + j + 1])
            X[idx, j + 1] = growth * (X[idx, j] + drift + noise)
        frozen = ~alive
        X[frozen, j + 1] = X[frozen, j]
    # record terminal-node controls for completeness
    idx = np.flatnonzero(alive & (~positive | (X[:, -1] > x_floor)))
    if idx.size:
        tT = nodes[-1]
        C[idx, -1] = np.asarray(policy.consumption(tT, X[idx, -1]), dtype=float)
        U[idx, -1] = np.asarray(policy.investment(tT, X[idx, -1]), dtype=float).reshape(idx.size, d)
    if positive:
        alive &= X[:, -1] > x_floor
    return X, C, U, ~alive


def simulate_paths(
    policy,
    market: MarketModel,
    t0: float,
    x0,
    n_paths: Optional[int] = None,
    seed: Optional[int] = None,
    increments: Optional[np.ndarray] = None,
    x_floor: float = X_FLOOR_DEFAULT,
    n_workers: int = 1,
) -> WealthPaths:
    """Integrate the wealth SDE from (t0, x0) under the given policy.

    Either pass (n_paths, seed) to draw fresh increments, or reuse an
    ``increments`` array for common-random-numbers comparisons.
    """
    grid = market.grid
    k0 = grid.index_at(t0)
    steps = grid.steps - k0
    if steps < 1:
        raise DomainError("simulation start time must lie strictly before the horizon")
    if increments is None:
        if n_paths is None or seed is None:
            raise ValidationError("need either increments or (n_paths, seed)")
        if n_paths < 1:
            raise ValidationError("n_paths must be >= 1")
        increments = normal_increments(seed, n_paths, steps, market.n_assets)
    n = increments.shape[0]
    if increments.shape[1] != steps or increments.shape[2] != market.n_assets:
        raise ValidationError(
            f"increments shape {increments.shape} incompatible with {steps} steps, {market.n_assets} assets"
        )
    x0_arr = np.broadcast_to(np.asarray(x0, dtype=float), (n,))
    if policy.utility.positive_domain and np.any(x0_arr <= x_floor):
        raise DomainError("initial wealth outside the admissible domain")

    blocks = [(lo, min(lo + _BATCH, n)) for lo in range(0, n, _BATCH)]
    X = np.empty((n, steps + 1))
    C = np.empty((n, steps + 1))
    U = np.empty((n, steps + 1, market.n_assets))
    flagged = np.empty(n, dtype=bool)

    def run(block):
        lo, hi = block
        Xb, Cb, Ub, fb = _simulate_block(policy, market, k0, x0_arr[lo:hi], increments[lo:hi], x_floor)
        X[lo:hi], C[lo:hi], U[lo:hi], flagged[lo:hi] = Xb, Cb, Ub, fb

    if n_workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(run, blocks))
    else:
        for block in blocks:
            run(block)
    return WealthPaths(market, k0, X, C, U, increments, flagged)


def replay_with_spike(
    paths: WealthPaths,
    utility: Utility,
    t0: float,
    eps: float,
    v,
    x_floor: float = X_FLOOR_DEFAULT,
) -> WealthPaths:
    """Open-loop spike: offset the recorded control processes by v on
    [t0, t0 + eps) and re-integrate wealth with the same increments.

    Unlike re-running the feedback maps, the controls here do not react
    to the perturbed wealth, which is exactly the deviation class of the
    open-loop equilibrium notion.  Paths whose spiked consumption leaves
    the utility domain, or whose terminal wealth does, are flagged.
    """
    v = np.asarray(v, dtype=float)
    market = paths.market
    grid = market.grid
    dt = grid.dt
    nodes = paths.times
    steps = nodes.size - 1
    window = (nodes >= t0 - 1e-12) & (nodes < t0 + max(eps, 1e-12)) & (nodes < grid.horizon - 1e-12)
    if not np.any(window):
        window[np.argmin(np.abs(nodes - t0))] = True
    C = paths.consumption.copy()
    U = paths.investment.copy()
    live = ~paths.flagged
    C[np.ix_(live, window)] += v[0]
    U[np.ix_(live, window)] += v[1:]
    X = np.empty_like(paths.X)
    X[:, 0] = paths.X[:, 0]
    for j in range(steps):
        t = nodes[j]
        r = market.excess_return(t)
        sig = market.sigma_at(t)
        dw = paths.increments[:, j, :] * np.sqrt(dt)
        drift = (U[:, j] @ r - C[:, j]) * dt
        noise = (U[:, j] @ sig * dw).sum(axis=1)
        X[:, j + 1] = market.growth_factor(t, nodes[j + 1]) * (X[:, j] + drift + noise)
    flagged = paths.flagged.copy()
    flagged |= ~np.all(utility.admissible(C[:, window]), axis=1)
    if utility.positive_domain:
        flagged |= X[:, -1] <= x_floor
    return WealthPaths(market, paths.start_index, X, C, U, paths.increments, flagged)


def objective_per_path(
    paths: WealthPaths, discount, utility: Utility, t: float, scheme: str = "trapezoid"
) -> np.ndarray:
    """Per-path realization of J(t, x, u); NaN on flagged paths.

    Running utility integrated on the grid nodes by the trapezoid rule
    (default) or by the left-endpoint sum, plus the discounted terminal
    wealth utility.  The left-endpoint scheme weights each step exactly
    as the Euler dynamics do, which the spike test needs: a half-weight
    mismatch at the spike window edge would otherwise leave an
    eps-independent bias that survives division by eps.
    """
    grid = paths.market.grid
    times = paths.times
    lam = np.asarray(discount(times - t), dtype=float)
    n = paths.n_paths
    out = np.full(n, np.nan)
    ok = ~paths.flagged
    if not np.any(ok):
        return out
    c = paths.consumption[ok]
    vals = lam[None, :] * utility.phi(np.maximum(c, 1e-300) if utility.positive_domain else c)
    if scheme == "trapezoid":
        run = np.trapezoid(vals, dx=grid.dt, axis=1)
    elif scheme == "left":
        run = vals[:, :-1].sum(axis=1) * grid.dt
    else:
        raise ValidationError(f"unknown quadrature scheme '{scheme}'")
    term = float(discount(grid.horizon - t)) * utility.h(paths.X[ok, -1])
    out[ok] = run + term
    return out


def estimate_objective(
    policy,
    market: MarketModel,
    discount,
    utility: Utility,
    t: float,
    x,
    n_paths: Optional[int] = None,
    seed: Optional[int] = None,
    increments: Optional[np.ndarray] = None,
    x_floor: float = X_FLOOR_DEFAULT,
) -> ObjectiveEstimate:
    """Monte Carlo mean and standard error of the objective from (t, x)."""
    paths = simulate_paths(policy, market, t, x, n_paths, seed, increments, x_floor)
    vals = objective_per_path(paths, discount, utility, t)
    ok = np.isfinite(vals)
    n_used = int(ok.sum())
    if n_used == 0:
        return ObjectiveEstimate(np.nan, np.nan, 0, paths.n_paths, t, float(np.mean(x)))
    mean = float(vals[ok].mean())
    stderr = float(vals[ok].std(ddof=1) / np.sqrt(n_used)) if n_used > 1 else 0.0
    return ObjectiveEstimate(mean, stderr, n_used, int(paths.flagged.sum()), t, float(np.mean(x)))
