"""
Resolvent integral kernels of the free and half-plane Dirac operators.

Functions:
  landau_phase_phi2: Landau-gauge phase (y1 - x1) y2
  free_kernel: kernel of (-i grad . sigma - i s)^(-1) on the plane
  edge_kernel_b0: half-plane kernel with the infinite-mass boundary condition
  dressed_S_kernel / dressed_T_kernel: magnetic phase-dressed kernels
  dirac_residual: finite-difference check of the defining equation
  gauge_covariance_residual: magnetic translations commute with -i grad - bA
  schur_norm: Schur-test proxy for the operator norm of S_b or T_b
  kernel_table: kernel samples as a DataFrame

Every kernel has a vectorized form taking point arrays of shape (..., 2) and
returning matrices of shape (..., 2, 2); the PlanePoint functions wrap those.
"""

from collections.abc import Callable, Sequence
import logging
import math

import numpy as np
import pandas as pd
from scipy.integrate import quad

from diraclab.domain.errors import ConvergenceError
from diraclab.domain.errors import DomainError
from diraclab.domain.errors import PreconditionError
from diraclab.domain.types import PlanePoint
from diraclab.domain.types import SIGMA_1
from diraclab.domain.types import SIGMA_2
from diraclab.domain.types import SpectralParameter
from diraclab.domain.types import SpinorMatrix
from diraclab.engine.specfun import macdonald_k0_prime_values
from diraclab.engine.specfun import macdonald_k0_values

logger = logging.getLogger(__name__)

SAMPLE_X1 = (-2.0, -1.0, 0.0, 1.0, 2.0)
SAMPLE_X2 = (0.0, 0.5, 1.0, 2.0, 5.0)
KERNEL_IDS = ('free', 'edge', 'S', 'T')

_SIGMA1 = SIGMA_1.entries
_SIGMA2 = SIGMA_2.entries

ArrayKernel = Callable[[np.ndarray, np.ndarray, float, float], np.ndarray]


def landau_phase_phi2(x: PlanePoint, y: PlanePoint) -> float:
  """Landau-gauge phase phi2(x, y) = (y1 - x1) y2."""
  return (y.x1 - x.x1) * y.x2


def _phi2_array(x: np.ndarray, y: np.ndarray) -> np.ndarray:
  return (y[..., 0] - x[..., 0]) * y[..., 1]


def free_kernel_array(x: np.ndarray, xp: np.ndarray, s: float) -> np.ndarray:
  """
  Vectorized free kernel.

  K(x, x') = (2 pi)^-1 [ i s K0(s r) I - i s K0'(s r) sigma . n ],
  r = |x - x'|, n = (x - x') / r.

  Args:
    x: Points, shape (..., 2)
    xp: Points, shape (..., 2), broadcastable with x
    s: sqrt(lambda) > 0

  Returns:
    Complex array of shape (..., 2, 2)
  """
  d = np.asarray(x, dtype=float) - np.asarray(xp, dtype=float)
  r = np.hypot(d[..., 0], d[..., 1])
  if np.any(r == 0):
    raise DomainError('Kernel is singular on the diagonal x = xp')
  k0 = macdonald_k0_values(s * r)
  k0p = macdonald_k0_prime_values(s * r)
  n1 = d[..., 0] / r
  n2 = d[..., 1] / r
  pref = 1j * s / (2.0 * math.pi)
  out = np.zeros(r.shape + (2, 2), dtype=complex)
  out[..., 0, 0] = pref * k0
  out[..., 1, 1] = pref * k0
  # sigma . n = [[0, n1 - i n2], [n1 + i n2, 0]]
  out[..., 0, 1] = -pref * k0p * (n1 - 1j * n2)
  out[..., 1, 0] = -pref * k0p * (n1 + 1j * n2)
  return out


def _reflect(points: np.ndarray) -> np.ndarray:
  out = np.array(points, dtype=float, copy=True)
  out[..., 1] = -out[..., 1]
  return out


def edge_kernel_array(x: np.ndarray, xp: np.ndarray, s: float) -> np.ndarray:
  """Vectorized half-plane kernel K(x, xp*) sigma1 + K(x, xp)."""
  return (free_kernel_array(x, _reflect(xp), s) @ _SIGMA1 +
          free_kernel_array(x, xp, s))


def dressed_s_array(
    x: np.ndarray,
    xp: np.ndarray,
    s: float,
    b: float,
) -> np.ndarray:
  """Vectorized S_b = exp(i b phi2(x, xp)) K^E(x, xp)."""
  phase = np.exp(1j * b * _phi2_array(np.asarray(x), np.asarray(xp)))
  return phase[..., None, None] * edge_kernel_array(x, xp, s)


def dressed_t_array(
    x: np.ndarray,
    xp: np.ndarray,
    s: float,
    b: float,
) -> np.ndarray:
  """
  Vectorized T_b = exp(i b phi2) (-b A(x - xp) . sigma) K^E.

  With A(v) = (-v2, 0) the prefactor is b (x2 - xp2) sigma1.
  """
  x = np.asarray(x, dtype=float)
  xp = np.asarray(xp, dtype=float)
  factor = b * (x[..., 1] - xp[..., 1]) * np.exp(1j * b * _phi2_array(x, xp))
  return factor[..., None, None] * (_SIGMA1 @ edge_kernel_array(x, xp, s))


def _free(x, xp, s, b):
  del b
  return free_kernel_array(x, xp, s)


def _edge(x, xp, s, b):
  del b
  return edge_kernel_array(x, xp, s)


ARRAY_KERNELS: dict[str, ArrayKernel] = {
    'free': _free,
    'edge': _edge,
    'S': dressed_s_array,
    'T': dressed_t_array,
}


def get_array_kernel(kernel_id: str) -> ArrayKernel:
  """Look up a vectorized kernel by id."""
  if kernel_id not in ARRAY_KERNELS:
    raise KeyError(f"Unknown kernel: '{kernel_id}'. "
                   f'Available: {list(ARRAY_KERNELS.keys())}')
  return ARRAY_KERNELS[kernel_id]


def _check_half_plane(*points: PlanePoint) -> None:
  for p in points:
    if p.x2 < 0:
      raise DomainError(f'Edge kernels need points with x2 >= 0, got {p}')


def _check_b(b: float) -> None:
  if not (math.isfinite(b) and b >= 0):
    raise DomainError(f'Magnetic field b must be >= 0, got {b}')


def free_kernel(
    x: PlanePoint,
    xp: PlanePoint,
    s: SpectralParameter,
) -> SpinorMatrix:
  """
  Free resolvent kernel at spectral parameter i sqrt(lambda).

  Args:
    x: Observation point
    xp: Source point (x != xp)
    s: Spectral parameter

  Returns:
    Kernel value

  Raises:
    DomainError: If x = xp
  """
  return SpinorMatrix(
      free_kernel_array(x.as_array(), xp.as_array(), s.sqrt_lambda))


def edge_kernel_b0(
    x: PlanePoint,
    xp: PlanePoint,
    s: SpectralParameter,
) -> SpinorMatrix:
  """
  Half-plane resolvent kernel for b = 0 with the infinite-mass condition.

  Built by reflection: K(x, xp*) sigma1 + K(x, xp), xp* = (xp1, -xp2). At
  x2 = 0 both rows coincide, which is the boundary condition psi1 = psi2.

  Raises:
    DomainError: On either singularity or for points with x2 < 0
  """
  _check_half_plane(x, xp)
  return SpinorMatrix(
      edge_kernel_array(x.as_array(), xp.as_array(), s.sqrt_lambda))


def dressed_S_kernel(  # pylint: disable=invalid-name
    b: float,
    x: PlanePoint,
    xp: PlanePoint,
    s: SpectralParameter,
) -> SpinorMatrix:
  """Phase-dressed kernel S_b(x, xp) = exp(i b phi2(x, xp)) K^E(x, xp)."""
  _check_b(b)
  _check_half_plane(x, xp)
  return SpinorMatrix(
      dressed_s_array(x.as_array(), xp.as_array(), s.sqrt_lambda, b))


def dressed_T_kernel(  # pylint: disable=invalid-name
    b: float,
    x: PlanePoint,
    xp: PlanePoint,
    s: SpectralParameter,
) -> SpinorMatrix:
  """Phase-dressed kernel T_b(x, xp) = exp(i b phi2) b (x2 - xp2) sigma1 K^E."""
  _check_b(b)
  _check_half_plane(x, xp)
  return SpinorMatrix(
      dressed_t_array(x.as_array(), xp.as_array(), s.sqrt_lambda, b))


def dirac_residual(
    kernel_id: str,
    x: PlanePoint,
    xp: PlanePoint,
    s: SpectralParameter,
    h: float = 1e-4,
) -> float:
  """
  Relative residual of (-i grad_x . sigma - i s) applied to a kernel.

  Derivatives in x are central differences with step h, so the residual is
  O(h^2) away from the singularities.

  Args:
    kernel_id: 'free' or 'edge'
    x: Observation point
    xp: Source point
    s: Spectral parameter
    h: Difference step (<= 1e-3)

  Returns:
    ||D K||_F / ||K||_F

  Raises:
    PreconditionError: If a singularity is closer than 10 h or h > 1e-3
  """
  if kernel_id not in ('free', 'edge'):
    raise KeyError(f"Unknown kernel: '{kernel_id}'. Available: "
                   "['free', 'edge']")
  if not 0 < h <= 1e-3:
    raise PreconditionError(f'Difference step must be in (0, 1e-3], got {h}')
  singular = [xp] if kernel_id == 'free' else [xp, xp.reflected()]
  for point in singular:
    if x.distance(point) < 10 * h:
      raise PreconditionError(
          f'Point {x} is within 10h of the kernel singularity at {point}')
  kernel = get_array_kernel(kernel_id)
  sq = s.sqrt_lambda
  xa = x.as_array()
  xpa = xp.as_array()
  e1 = np.array([h, 0.0])
  e2 = np.array([0.0, h])
  stencil = np.stack([xa, xa + e1, xa - e1, xa + e2, xa - e2])
  values = kernel(stencil, np.broadcast_to(xpa, stencil.shape), sq, 0.0)
  k, k_p1, k_m1, k_p2, k_m2 = values
  d1 = (k_p1 - k_m1) / (2 * h)
  d2 = (k_p2 - k_m2) / (2 * h)
  applied = -1j * (_SIGMA1 @ d1) - 1j * (_SIGMA2 @ d2) - 1j * sq * k
  return float(np.linalg.norm(applied) / np.linalg.norm(k))


def _gauge_test_function(y: np.ndarray) -> np.ndarray:
  """Complex Gaussian u(y) = (1 + i y1) exp(-|y|^2 / 2)."""
  return (1.0 + 1j * y[..., 0]) * np.exp(-0.5 * np.sum(y * y, axis=-1))


def _gauge_test_gradient(y: np.ndarray) -> np.ndarray:
  g = np.exp(-0.5 * np.sum(y * y, axis=-1))
  u = (1.0 + 1j * y[..., 0]) * g
  return np.stack([1j * g - y[..., 0] * u, -y[..., 1] * u], axis=-1)


def gauge_covariance_residual(
    b: float,
    x: PlanePoint,
    eta: PlanePoint,
    h: float = 1e-4,
) -> float:
  """
  Check that magnetic translations commute with -i grad - b A.

  For w(x) = exp(i b phi2(x, eta)) u(x - eta):
    (-i grad - b A(x)) w = exp(i b phi2(x, eta)) [(-i grad - b A) u](x - eta)
  with A(x) = (-x2, 0). The left side uses central differences with step h.

  Returns:
    Relative residual (Euclidean norm over both components)
  """
  _check_b(b)
  xa = x.as_array()
  ea = eta.as_array()

  def w(points: np.ndarray) -> np.ndarray:
    phase = np.exp(1j * b * _phi2_array(points, np.broadcast_to(ea,
                                                                points.shape)))
    return phase * _gauge_test_function(points - ea)

  steps = np.array([[h, 0.0], [0.0, h]])
  grad = np.array([(w(xa + step) - w(xa - step)) / (2 * h) for step in steps])
  a_x = np.array([-xa[1], 0.0])
  lhs = -1j * grad - b * a_x * w(xa)

  y = xa - ea
  a_y = np.array([-y[1], 0.0])
  phase = np.exp(1j * b * (ea[0] - xa[0]) * ea[1])
  rhs = phase * (-1j * _gauge_test_gradient(y) -
                 b * a_y * _gauge_test_function(y))
  return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))


def spectral_norm_2x2(m: np.ndarray) -> np.ndarray:
  """Largest singular value of each 2x2 matrix in an array (..., 2, 2)."""
  fro2 = np.sum(np.abs(m)**2, axis=(-2, -1))
  det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
  disc = np.sqrt(np.maximum(fro2 * fro2 - 4.0 * np.abs(det)**2, 0.0))
  return np.sqrt(0.5 * (fro2 + disc))


_ARC_NODES, _ARC_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _arc_integral(
    kernel: ArrayKernel,
    x: np.ndarray,
    rho: float,
    s: float,
    b: float,
) -> float:
  """Integral over the circle of radius rho about x, clipped to x2' >= 0."""
  x2 = x[1]
  if rho <= x2:
    lo, hi = 0.0, 2.0 * math.pi
  else:
    alpha = math.asin(x2 / rho)
    lo, hi = -alpha, math.pi + alpha
  theta = 0.5 * (hi - lo) * _ARC_NODES + 0.5 * (hi + lo)
  weights = 0.5 * (hi - lo) * _ARC_WEIGHTS
  xp = np.stack([x[0] + rho * np.cos(theta), x[1] + rho * np.sin(theta)],
                axis=-1)
  xp[:, 1] = np.maximum(xp[:, 1], 0.0)
  norms = spectral_norm_2x2(kernel(np.broadcast_to(x, xp.shape), xp, s, b))
  return float(rho * np.dot(weights, norms))


def _row_integral(
    kernel: ArrayKernel,
    x: np.ndarray,
    s: float,
    b: float,
    radius: float,
) -> tuple[float, float]:
  points = [x[1]] if 0 < x[1] < radius else None
  value, abserr = quad(lambda rho: _arc_integral(kernel, x, rho, s, b)
                       if rho > 0 else 0.0,
                       0.0,
                       radius,
                       points=points,
                       limit=200,
                       epsabs=1e-14,
                       epsrel=1e-9)
  return value, abserr


def schur_norm(
    kernel_id: str,
    b: float,
    s: SpectralParameter,
    truncation_radius: float | None = None,
) -> float:
  """
  Schur-test proxy sup_x int_E ||K(x, xp)|| dxp for S_b or T_b.

  The integral uses polar coordinates about x (adaptive in the radius,
  Gauss-Legendre on the arc inside the half-plane), which absorbs the 1/r
  singularity. The supremum is taken over a 5 x 5 sample grid with
  x2 in {0, 0.5, 1, 2, 5}.

  Args:
    kernel_id: 'S' or 'T'
    b: Magnetic field strength (>= 0)
    s: Spectral parameter
    truncation_radius: Outer radius (default 40 / sqrt(lambda))

  Returns:
    Largest row integral over the sample grid

  Raises:
    PreconditionError: If the tail at the truncation radius is not negligible
    ConvergenceError: If the radial quadrature does not converge
  """
  if kernel_id not in ('S', 'T'):
    raise KeyError(f"Unknown kernel: '{kernel_id}'. Available: ['S', 'T']")
  _check_b(b)
  sq = s.sqrt_lambda
  radius = 40.0 / sq if truncation_radius is None else truncation_radius
  kernel = get_array_kernel(kernel_id)

  best = 0.0
  best_point = None
  for x2 in SAMPLE_X2:
    for x1 in SAMPLE_X1:
      x = np.array([x1, x2])
      value, abserr = _row_integral(kernel, x, sq, b, radius)
      if abserr > 1e-6 * max(abs(value), 1e-300):
        raise ConvergenceError(
            f'Schur integral at x={tuple(x)} did not converge',
            estimate=abserr,
            diagnostics={
                'value': value,
                'kernel': kernel_id
            })
      if value > 0:
        # Tail beyond the radius: integrand at the radius times the decay
        # length 1/sqrt(lambda).
        tail = _arc_integral(kernel, x, radius, sq, b) / sq
        if tail > 1e-10 * value:
          raise PreconditionError(
              f'Truncation radius {radius:g} too small: tail {tail:.2e} '
              f'vs value {value:.2e}')
      if value > best:
        best, best_point = value, (x1, x2)
  logger.debug('schur_norm %s b=%g s=%g: %.10g at %s', kernel_id, b, sq,
               best, best_point)
  return best


def kernel_table(
    kernel_id: str,
    pairs: Sequence[tuple[PlanePoint, PlanePoint]],
    s: SpectralParameter,
    b: float = 0.0,
) -> pd.DataFrame:
  """
  Kernel samples as rows x1, x2, xp1, xp2, sqrt_lambda, re11, im11, ..., im22.

  Args:
    kernel_id: One of 'free', 'edge', 'S', 'T'
    pairs: (x, xp) point pairs
    s: Spectral parameter
    b: Magnetic field strength for the dressed kernels

  Returns:
    DataFrame with one row per pair
  """
  kernel = get_array_kernel(kernel_id)
  if kernel_id != 'free':
    _check_half_plane(*[p for pair in pairs for p in pair])
  x = np.array([p.as_array() for p, _ in pairs]).reshape(-1, 2)
  xp = np.array([q.as_array() for _, q in pairs]).reshape(-1, 2)
  values = kernel(x, xp, s.sqrt_lambda, b) if len(pairs) else np.zeros(
      (0, 2, 2), dtype=complex)
  data = {
      'x1': x[:, 0],
      'x2': x[:, 1],
      'xp1': xp[:, 0],
      'xp2': xp[:, 1],
      'sqrt_lambda': np.full(len(pairs), s.sqrt_lambda),
  }
  for i in range(2):
    for j in range(2):
      data[f're{i + 1}{j + 1}'] = values[:, i, j].real
      data[f'im{i + 1}{j + 1}'] = values[:, i, j].imag
  return pd.DataFrame(data)
