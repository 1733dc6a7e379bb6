"""
Error types raised by the numerical engine.

Two families:
- DomainError (a ValueError): the caller asked for something outside an
  operation's domain or precondition. The CLI maps these to exit code 2.
- AccuracyError (an ArithmeticError): the computation ran but could not reach
  the requested accuracy. Carries the achieved estimate and diagnostics.
  The CLI maps these to exit code 3.
"""

from typing import Any, Optional


class DomainError(ValueError):
  """Argument outside the domain of a function."""


class RangeError(DomainError):
  """Argument outside the documented working range of a special function."""


class PreconditionError(DomainError):
  """A documented precondition of an operation does not hold."""


class ConstructionError(DomainError):
  """An object cannot be built from the given parameters."""


class AccuracyError(ArithmeticError):
  """
  Numerical result did not reach the requested accuracy.

  Attributes:
    estimate: Achieved error estimate (nan if unknown)
    diagnostics: Extra context for the report
  """

  def __init__(
      self,
      message: str,
      estimate: float = float('nan'),
      diagnostics: Optional[dict[str, Any]] = None,
  ):
    super().__init__(message)
    self.estimate = estimate
    self.diagnostics = diagnostics or {}


class ResolutionError(AccuracyError):
  """Grid too coarse for the requested eigenvalue accuracy."""


class TruncationError(AccuracyError):
  """Finite box or finite sum cuts off non-negligible mass."""


class ConvergenceError(AccuracyError):
  """Quadrature or ODE integration did not converge."""


class ConsistencyError(AccuracyError):
  """Two independent backends disagree."""


class LabelingError(AccuracyError):
  """Eigenvalues cannot be assigned to branches unambiguously."""


class ContinuationError(AccuracyError):
  """A branch lost its eigenvalue between two samples."""


class CoverageError(AccuracyError):
  """Traced branches do not cover the support of the test function."""


class AmbiguousCrossingError(AccuracyError):
  """A branch touches a reference energy with vanishing velocity."""
