"""
Test functions for trace functionals and the functional calculus.

Every family exposes closed-form derivatives of any order, which the
almost-analytic extension needs.
"""

from abc import ABC
from abc import abstractmethod
from typing import Any, Optional

import numpy as np

from diraclab.domain.types import ComputeOutput

# Derivatives of every family are below this outside window().
WINDOW_THRESHOLD = 1e-17


class TestFunction(ABC):
  """Base class for real test functions f with derivatives of any order."""

  __test__ = False

  @property
  @abstractmethod
  def name(self) -> str:
    """Registry name of the family."""

  @abstractmethod
  def derivative(self, x: np.ndarray | float, order: int) -> np.ndarray:
    """
    The order-th derivative of f at x.

    Args:
      x: Points (scalar or array)
      order: Derivative order (0 gives f itself)

    Returns:
      Array with the shape of x
    """

  @property
  def support(self) -> Optional[tuple[float, float]]:
    """Closed interval outside which f vanishes; None if f has full support."""
    return None

  @property
  def plateau(self) -> Optional[tuple[float, float]]:
    """Closed interval on which f is identically 1, if any."""
    return None

  @property
  def derivative_support(self) -> Optional[tuple[float, float]]:
    """Hull of the support of f'; None if f' vanishes identically."""
    return self.window()

  @property
  def smoothness(self) -> str:
    return 'C-infinity'

  @abstractmethod
  def window(self) -> tuple[float, float]:
    """Finite interval outside which every derivative is below 1e-17."""

  def value(self, x: np.ndarray | float) -> np.ndarray:
    return self.derivative(x, 0)

  def __call__(self, x: np.ndarray | float) -> np.ndarray:
    return self.derivative(x, 0)

  def deriv(self, x: np.ndarray | float) -> np.ndarray:
    return self.derivative(x, 1)

  def describe(self) -> dict[str, Any]:
    """Parameters echoed into report metadata."""
    return {
        'name': self.name,
        'support': self.support,
        'plateau': self.plateau,
        'smoothness': self.smoothness,
    }

  def evaluate(self, x: np.ndarray | float) -> ComputeOutput[np.ndarray]:
    """f(x) with the family description as diagnostics."""
    return ComputeOutput(value=self.value(x), diag=self.describe())
