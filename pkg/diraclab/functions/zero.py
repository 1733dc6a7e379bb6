"""The zero test function."""

from typing import Optional

import numpy as np

from diraclab.functions.base import TestFunction


class ZeroFunction(TestFunction):
  """f = 0; every trace functional of it vanishes."""

  @property
  def name(self) -> str:
    return 'zero'

  def derivative(self, x: np.ndarray | float, order: int) -> np.ndarray:
    if order < 0:
      raise ValueError(f'Derivative order must be >= 0, got {order}')
    return np.zeros_like(np.asarray(x, dtype=float))

  @property
  def support(self) -> Optional[tuple[float, float]]:
    return (0.0, 0.0)

  @property
  def derivative_support(self) -> Optional[tuple[float, float]]:
    return None

  def window(self) -> tuple[float, float]:
    return (0.0, 0.0)
