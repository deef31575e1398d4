"""Utility families: power (CRRA), log, and exponential (CARA).

Each exposes running utility phi, terminal utility h, their first two
derivatives, and the inverse marginal I = phi_c^{-1}.  Power and log
live on (0, inf); exponential accepts all reals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError


class Utility:
    """Base class. Array arguments are evaluated elementwise."""

    #: consumption / wealth must be strictly positive
    positive_domain: bool = True

    def phi(self, c):
        raise NotImplementedError

    def phi_c(self, c):
        raise NotImplementedError

    def phi_cc(self, c):
        raise NotImplementedError

    def h(self, x):
        raise NotImplementedError

    def h_x(self, x):
        raise NotImplementedError

    def h_xx(self, x):
        raise NotImplementedError

    def inverse_marginal(self, y):
        raise NotImplementedError

    def admissible(self, z) -> np.ndarray:
        """Elementwise admissibility mask for consumption/wealth values."""
        z = np.asarray(z, dtype=float)
        ok = np.isfinite(z)
        if self.positive_domain:
            ok &= z > 0
        return ok

    def _check_domain(self, z, what: str):
        if not np.all(self.admissible(z)):
            raise DomainError(f"{what} outside the admissible domain of {type(self).__name__}")
        return np.asarray(z, dtype=float)

    def _check_marginal(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(~np.isfinite(y)) or np.any(y <= 0):
            raise DomainError("inverse marginal utility requires y > 0")
        return y


@dataclass(frozen=True)
class PowerUtility(Utility):
    """phi(c) = c^gamma / gamma, h(x) = a x^gamma / gamma, gamma in (0, 1)."""

    a: float
    gamma: float

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma < 1.0):
            raise ValidationError(f"power exponent must satisfy gamma in (0, 1), got {self.gamma}")
        if self.a <= 0:
            raise ValidationError(f"terminal weight must be positive, got a={self.a}")

    def phi(self, c):
        return self._check_domain(c, "consumption") ** self.gamma / self.gamma

    def phi_c(self, c):
        return self._check_domain(c, "consumption") ** (self.gamma - 1.0)

    def phi_cc(self, c):
        return (self.gamma - 1.0) * self._check_domain(c, "consumption") ** (self.gamma - 2.0)

    def h(self, x):
        return self.a * self._check_domain(x, "wealth") ** self.gamma / self.gamma

    def h_x(self, x):
        return self.a * self._check_domain(x, "wealth") ** (self.gamma - 1.0)

    def h_xx(self, x):
        return self.a * (self.gamma - 1.0) * self._check_domain(x, "wealth") ** (self.gamma - 2.0)

    def inverse_marginal(self, y):
        return self._check_marginal(y) ** (1.0 / (self.gamma - 1.0))


@dataclass(frozen=True)
class LogUtility(Utility):
    """phi(c) = ln c, h(x) = a ln x."""

    a: float

    def __post_init__(self) -> None:
        if self.a <= 0:
            raise ValidationError(f"terminal weight must be positive, got a={self.a}")

    def phi(self, c):
        return np.log(self._check_domain(c, "consumption"))

    def phi_c(self, c):
        return 1.0 / self._check_domain(c, "consumption")

    def phi_cc(self, c):
        return -1.0 / self._check_domain(c, "consumption") ** 2

    def h(self, x):
        return self.a * np.log(self._check_domain(x, "wealth"))

    def h_x(self, x):
        return self.a / self._check_domain(x, "wealth")

    def h_xx(self, x):
        return -self.a / self._check_domain(x, "wealth") ** 2

    def inverse_marginal(self, y):
        return 1.0 / self._check_marginal(y)


@dataclass(frozen=True)
class ExponentialUtility(Utility):
    """phi(c) = -exp(-gamma c)/gamma, h(x) = -a exp(-gamma x)/gamma."""

    a: float
    gamma: float
    positive_domain = False

    def __post_init__(self) -> None:
        if self.a <= 0 or self.gamma <= 0:
            raise ValidationError(f"exponential utility needs a, gamma > 0, got a={self.a}, gamma={self.gamma}")

    def phi(self, c):
        return -np.exp(-self.gamma * np.asarray(c, dtype=float)) / self.gamma

    def phi_c(self, c):
        return np.exp(-self.gamma * np.asarray(c, dtype=float))

    def phi_cc(self, c):
        return -self.gamma * np.exp(-self.gamma * np.asarray(c, dtype=float))

    def h(self, x):
        return -self.a * np.exp(-self.gamma * np.asarray(x, dtype=float)) / self.gamma

    def h_x(self, x):
        return self.a * np.exp(-self.gamma * np.asarray(x, dtype=float))

    def h_xx(self, x):
        return -self.a * self.gamma * np.exp(-self.gamma * np.asarray(x, dtype=float))

    def inverse_marginal(self, y):
        return -np.log(self._check_marginal(y)) / self.gamma
