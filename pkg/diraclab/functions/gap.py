"""Gap functions: smooth bumps equal to 1 on a spectral island."""

import math
from typing import Any, Optional

import numpy as np

from diraclab.functions.base import TestFunction
from diraclab.functions.mollifier import smoothstep_derivatives


class GapFunction(TestFunction):
  """
  Compactly supported bump rising on [a0, a1], 1 on [a1, c0], falling on
  [c0, c1].

  Both ramps are the e^(-1/t) smooth step, so f' lives in the two ramps only.
  """

  def __init__(self, lower: tuple[float, float], upper: tuple[float, float]):
    a0, a1 = lower
    c0, c1 = upper
    if not all(math.isfinite(v) for v in (a0, a1, c0, c1)):
      raise ValueError('GapFunction ramps must be finite')
    if not a0 < a1 <= c0 < c1:
      raise ValueError('GapFunction needs a0 < a1 <= c0 < c1, got '
                       f'lower={lower}, upper={upper}')
    self.lower = (float(a0), float(a1))
    self.upper = (float(c0), float(c1))

  @property
  def name(self) -> str:
    return 'gap'

  def derivative(self, x: np.ndarray | float, order: int) -> np.ndarray:
    if order < 0:
      raise ValueError(f'Derivative order must be >= 0, got {order}')
    x = np.asarray(x, dtype=float)
    a0, a1 = self.lower
    c0, c1 = self.upper
    alpha = 1.0 / (a1 - a0)
    beta = 1.0 / (c1 - c0)
    rise = smoothstep_derivatives(alpha * (x - a0), order)[order]
    fall = smoothstep_derivatives(beta * (x - c0), order)[order]
    if order == 0:
      return rise * (1.0 - fall)
    return alpha**order * rise - beta**order * fall

  @property
  def support(self) -> Optional[tuple[float, float]]:
    return (self.lower[0], self.upper[1])

  @property
  def plateau(self) -> Optional[tuple[float, float]]:
    return (self.lower[1], self.upper[0])

  @property
  def derivative_support(self) -> Optional[tuple[float, float]]:
    return self.support

  def window(self) -> tuple[float, float]:
    return (self.lower[0], self.upper[1])

  def describe(self) -> dict[str, Any]:
    info = super().describe()
    info.update({'lower_ramp': self.lower, 'upper_ramp': self.upper})
    return info
