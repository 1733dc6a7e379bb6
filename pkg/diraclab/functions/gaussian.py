"""Gaussian test function e^(-t^2)."""

import numpy as np
from numpy.polynomial import hermite

from diraclab.functions.base import TestFunction

# e^(-t^2) |H_n(t)| < 1e-17 for |t| >= 10 and n <= 12.
_WINDOW_HALF_WIDTH = 10.0


class GaussianFunction(TestFunction):
  """
  f(t) = e^(-t^2).

  Derivatives use the Rodrigues formula
  d^n/dt^n e^(-t^2) = (-1)^n H_n(t) e^(-t^2) with physicists' Hermite H_n.
  """

  @property
  def name(self) -> str:
    return 'gaussian'

  def derivative(self, x: np.ndarray | float, order: int) -> np.ndarray:
    if order < 0:
      raise ValueError(f'Derivative order must be >= 0, got {order}')
    x = np.asarray(x, dtype=float)
    coeffs = np.zeros(order + 1)
    coeffs[order] = 1.0
    return (-1.0)**order * hermite.hermval(x, coeffs) * np.exp(-x * x)

  def window(self) -> tuple[float, float]:
    return (-_WINDOW_HALF_WIDTH, _WINDOW_HALF_WIDTH)
