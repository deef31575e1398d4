"""Exception hierarchy shared across the package."""


class MertonEqError(Exception):
    """Base class for all package errors."""


class ValidationError(MertonEqError):
    """A model or configuration invariant is violated at construction."""


class DomainError(MertonEqError):
    """An argument lies outside the mathematical domain of an operation."""


class EllipticityError(MertonEqError):
    """The volatility Gram matrix is singular or not positive definite."""


class SolverError(MertonEqError):
    """A solver failed (non-convergence, unsolvable coefficient curve)."""


class DegeneracyError(SolverError):
    """The spatial derivative of the theta surface crossed zero."""


class ConvergenceError(SolverError):
    """An iterative scheme exhausted its iteration budget."""
