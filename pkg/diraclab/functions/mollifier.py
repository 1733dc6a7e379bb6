"""
Smooth step built from phi(t) = exp(-1/t), with derivatives of any order.

phi^(n)(t) = P_n(1/t) exp(-1/t) with P_0 = 1 and
P_n+1(u) = u^2 (P_n(u) - P_n'(u)). The step s(t) = phi(t) / (phi(t) +
phi(1 - t)) is 0 for t <= 0 and 1 for t >= 1; its derivatives follow from the
Leibniz rule applied to s * (phi(t) + phi(1 - t)) = phi(t).
"""

import math

import numpy as np
from numpy.polynomial import polynomial

# exp(-1/t) underflows below this.
_T_MIN = 1.0 / 700.0


def phi_derivatives(t: np.ndarray | float, order: int) -> list[np.ndarray]:
  """phi^(n)(t) for n = 0..order; phi vanishes for t <= 0."""
  t = np.asarray(t, dtype=float)
  positive = t > _T_MIN
  u = np.where(positive, 1.0 / np.where(positive, t, 1.0), 0.0)
  decay = np.where(positive, np.exp(-u), 0.0)

  coeffs = np.array([1.0])
  out = []
  for _ in range(order + 1):
    out.append(np.where(positive, polynomial.polyval(u, coeffs) * decay, 0.0))
    step = polynomial.polysub(coeffs, polynomial.polyder(coeffs))
    coeffs = polynomial.polymulx(polynomial.polymulx(step))
  return out


def smoothstep_derivatives(t: np.ndarray | float,
                           order: int) -> list[np.ndarray]:
  """
  s^(n)(t) for n = 0..order.

  Returns exact 0 (and 1 for n = 0) outside (0, 1).
  """
  t = np.asarray(t, dtype=float)
  phi = phi_derivatives(t, order)
  phi_mirror = phi_derivatives(1.0 - t, order)
  denom = [
      phi[k] + (-1.0)**k * phi_mirror[k] for k in range(order + 1)
  ]
  s: list[np.ndarray] = []
  for n in range(order + 1):
    acc = phi[n].copy()
    for k in range(n):
      acc -= math.comb(n, k) * s[k] * denom[n - k]
    s.append(acc / denom[0])

  inside = (t > 0.0) & (t < 1.0)
  s[0] = np.where(t >= 1.0, 1.0, np.where(inside, s[0], 0.0))
  for n in range(1, order + 1):
    s[n] = np.where(inside, s[n], 0.0)
  return s


def smoothstep(t: np.ndarray | float) -> np.ndarray:
  return smoothstep_derivatives(t, 0)[0]


def cutoff(y: np.ndarray | float) -> tuple[np.ndarray, np.ndarray]:
  """
  Even bump g with g = 1 on |y| <= 1/2 and g = 0 on |y| >= 1, and g'.

  Returns:
    Tuple (g(y), g'(y))
  """
  y = np.asarray(y, dtype=float)
  s = smoothstep_derivatives(2.0 * np.abs(y) - 1.0, 1)
  return 1.0 - s[0], -2.0 * np.sign(y) * s[1]
