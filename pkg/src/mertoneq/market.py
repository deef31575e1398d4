"""Deterministic market coefficients and derived quantities.

Coefficients are node samples on a :class:`TimeGrid`, linearly
interpolated between nodes.  The riskless rate r0, drift vector mu and
volatility matrix sigma are validated at construction: finiteness,
uniform ellipticity of sigma*sigma^T, and strictly positive excess
returns mu_i - r0 at every node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EllipticityError, ValidationError
from .grid import TimeGrid, cumulative_integral, interp_nodes

ELLIPTICITY_FLOOR = 1e-12


def _broadcast_samples(grid: TimeGrid, values, shape: tuple) -> np.ndarray:
    """Accept a constant or per-node samples; return (n+1, *shape) array."""
    arr = np.asarray(values, dtype=float)
    target = (grid.steps + 1,) + shape
    if arr.shape == shape or arr.ndim == 0:
        arr = np.broadcast_to(arr, target).copy()
    elif arr.shape != target:
        raise ValidationError(f"coefficient samples have shape {arr.shape}, expected {shape} or {target}")
    return arr


@dataclass(frozen=True)
class MarketModel:
    """Riskless rate, drifts and volatility on a time grid.

    Parameters may be scalars / constant arrays (held fixed over time) or
    full per-node sample arrays.
    """

    grid: TimeGrid
    r0: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    _cum_r0: np.ndarray = field(init=False, repr=False, compare=False)
    _sigma_inv_gram: np.ndarray = field(init=False, repr=False, compare=False)

    def __init__(self, grid: TimeGrid, r0, mu, sigma):
        # a 1-D mu is a constant drift vector; per-node samples must be (n+1, d)
        mu_arr = np.atleast_1d(np.asarray(mu, dtype=float))
        d = mu_arr.shape[-1] if mu_arr.ndim <= 2 else None
        if d is None:
            raise ValidationError(f"mu has unsupported shape {mu_arr.shape}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "r0", _broadcast_samples(grid, r0, ()))
        object.__setattr__(self, "mu", _broadcast_samples(grid, mu_arr, (d,)))
        sigma_arr = np.atleast_2d(np.asarray(sigma, dtype=float))
        object.__setattr__(self, "sigma", _broadcast_samples(grid, sigma_arr, (d, d)))
        self._validate()
        object.__setattr__(self, "_cum_r0", cumulative_integral(self.r0, grid.dt))
        gram = np.einsum("kij,klj->kil", self.sigma, self.sigma)
        object.__setattr__(self, "_sigma_inv_gram", np.linalg.inv(gram))

    def _validate(self) -> None:
        for name, arr in (("r0", self.r0), ("mu", self.mu), ("sigma", self.sigma)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite samples")
        if np.any(self.r0 < 0):
            raise ValidationError("riskless rate must be nonnegative")
        gram = np.einsum("kij,klj->kil", self.sigma, self.sigma)
        eigs = np.linalg.eigvalsh(gram)
        if eigs.min() <= ELLIPTICITY_FLOOR:
            raise EllipticityError(
                f"uniform ellipticity violated: min eigenvalue of sigma*sigma^T is {eigs.min():.3e}"
            )
        if np.any(self.mu <= self.r0[:, None]):
            raise ValidationError("excess returns must be strictly positive (mu_i > r0) at every node")

    @property
    def n_assets(self) -> int:
        return self.mu.shape[1]

    def riskless_rate(self, t: float) -> float:
        return float(interp_nodes(self.grid, self.r0, t))

    def excess_return(self, t: float) -> np.ndarray:
        """r(t) = mu(t) - r0(t) * 1."""
        return interp_nodes(self.grid, self.mu, t) - self.riskless_rate(t)

    def sigma_at(self, t: float) -> np.ndarray:
        return interp_nodes(self.grid, self.sigma, t)

    def gram_inverse(self, t: float) -> np.ndarray:
        """Sigma(t) = (sigma sigma^T)^{-1}, interpolated from node values."""
        sig = self.sigma_at(t)
        gram = sig @ sig.T
        try:
            return np.linalg.inv(gram)
        except np.linalg.LinAlgError as exc:  # unreachable given ellipticity invariant
            raise EllipticityError(f"singular volatility Gram matrix at t={t}") from exc

    def risk_premium_quadratic(self, t: float) -> float:
        """r(t)^T Sigma(t) r(t), nonnegative by positive definiteness."""
        r = self.excess_return(t)
        return float(r @ self.gram_inverse(t) @ r)

    def risk_premium_nodes(self) -> np.ndarray:
        """r^T Sigma r sampled at every grid node."""
        r = self.mu - self.r0[:, None]
        return np.einsum("ki,kij,kj->k", r, self._sigma_inv_gram, r)

    def refined(self, factor: int) -> "MarketModel":
        """The same coefficient curves resampled on a grid refined by
        ``factor``.  Node samples are linearly interpolated, which is exact
        because the model itself interpolates linearly between nodes."""
        if factor < 1:
            raise ValidationError(f"refinement factor must be >= 1, got {factor}")
        fine = self.grid.refine(factor)

        def resample(arr: np.ndarray) -> np.ndarray:
            flat = arr.reshape(arr.shape[0], -1)
            cols = [np.interp(fine.nodes, self.grid.nodes, flat[:, j]) for j in range(flat.shape[1])]
            return np.stack(cols, axis=1).reshape((fine.steps + 1,) + arr.shape[1:])

        return MarketModel(fine, resample(self.r0), resample(self.mu), resample(self.sigma))

    def rate_integral(self, s: float, tau: float) -> float:
        """Integral of r0 over [s, tau] from the cumulative node table."""
        if s > tau + 1e-12:
            raise DomainError(f"rate integral needs s <= tau, got s={s}, tau={tau}")
        return float(self._interp_cum(tau) - self._interp_cum(s))

    def _interp_cum(self, t: float) -> float:
        return float(interp_nodes(self.grid, self._cum_r0, t))

    def growth_factor(self, s: float, tau: float) -> float:
        """Theta(s, tau) = exp(integral of r0 over [s, tau]); Theta(s, s) = 1."""
        return float(np.exp(self.rate_integral(s, tau)))
