"""
Exception hierarchy for the incentives app.

Every error raised by the computational core derives from MechanismError.
Errors that describe bad input values also derive from ValueError, numerical
failures from ArithmeticError, so callers can catch either family.
"""
from typing import Optional


class MechanismError(Exception):
    """Base class for all incentive-mechanism errors."""


class DomainError(MechanismError, ValueError):
    """An argument lies outside the valid domain of a utility function."""

    def __init__(self, message: str, bound: Optional[str] = None):
        super().__init__(message)
        self.bound = bound


class MarginalRangeError(MechanismError, ValueError):
    """
    A marginal utility value has no preimage.

    For best responses this signals beta_i - p_i <= 0: the incentive meets or
    exceeds the unit cost and demand is unbounded.
    """


class DimensionError(MechanismError, ValueError):
    """Vector or matrix dimensions do not match the player count."""


class ConvergenceError(MechanismError, ArithmeticError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class InfeasibleError(MechanismError, ValueError):
    """No dual variable satisfies the budget equation on the search bracket."""


class NumericalError(MechanismError, ArithmeticError):
    """Linear algebra failure, NaN or overflow."""


class UnsupportedModelError(MechanismError, ValueError):
    """The scenario is outside the model class an operation is defined for."""


class IntegrationError(MechanismError, ArithmeticError):
    """An integrated trajectory left the interior of the state space."""

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


class InsufficientDataError(MechanismError, ValueError):
    """Too few usable samples for a fit."""


class LoadError(MechanismError, ValueError):
    """A scenario document could not be parsed or failed validation."""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        super().__init__(message)
        self.line = line
        self.key = key
