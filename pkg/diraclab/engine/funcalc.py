"""
Gap functions, almost-analytic extensions and the Helffer-Sjostrand calculus.

For a real test function f the extension
  f_N(z1 + i z2) = g(z2) sum_{j<=N} f^(j)(z1) (i z2)^j / j!
agrees with f on the real axis and lives in |z2| <= 1. Its dbar derivative
(d/dz1 + i d/dz2) f_N, twice the Wirtinger derivative, vanishes like |z2|^N
there. For a self-adjoint matrix A,
  f(A) = (1/(2 pi)) int dbar f_N(z) (A - z)^-1 dz1 dz2.
"""

from collections.abc import Sequence
from dataclasses import dataclass
import logging
import math

import numpy as np
from scipy.linalg import hessenberg

from diraclab.domain.errors import AccuracyError
from diraclab.domain.errors import ConstructionError
from diraclab.domain.errors import ConvergenceError
from diraclab.domain.errors import DomainError
from diraclab.domain.errors import PreconditionError
from diraclab.domain.types import ComputeOutput
from diraclab.domain.types import level_energy
from diraclab.domain.types import SpectralIsland
from diraclab.functions.base import TestFunction
from diraclab.functions.gap import GapFunction
from diraclab.functions.mollifier import cutoff
from diraclab.shared.parallel import ordered_map

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.25
DEFAULT_ORDER = 3
DEFAULT_DEPTH = 8
MAX_DEPTH = 12
HS_TOLERANCE = 1e-4
MAX_HS_DIMENSION = 512

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_TOP_PANELS = 8
_Z1_PANEL = 1.0 / 16.0
_MAX_BATCH_ENTRIES = 2**22


def make_gap_function(
    island: SpectralIsland,
    b: float,
    margin: float = DEFAULT_MARGIN,
) -> GapFunction:
  """
  Bump equal to 1 on the island's Landau levels and 0 on every other level.

  With e_lo, e_hi the outermost island levels, g_lo, g_hi the gaps to the
  neighbouring levels and m the margin, the plateau is
  [e_lo - m g_lo, e_hi + m g_hi] and the support is
  [e_lo - (1 - m) g_lo, e_hi + (1 - m) g_hi].

  Args:
    island: Contiguous set of Landau indices
    b: Magnetic field strength
    margin: Fraction of each gap kept clear, in (0, 1/2)

  Returns:
    GapFunction with both ramps inside the neighbouring gaps

  Raises:
    DomainError: If b or margin are out of range
    ConstructionError: If a neighbouring gap is not finite and positive
  """
  if not (math.isfinite(b) and b > 0):
    raise DomainError(f'Magnetic field b must be positive, got {b}')
  if not 0 < margin < 0.5:
    raise DomainError(f'margin must be in (0, 1/2), got {margin}')
  e_lo = level_energy(island.lo, b)
  e_hi = level_energy(island.hi, b)
  below = level_energy(island.lo - 1, b)
  above = level_energy(island.hi + 1, b)
  g_lo = e_lo - below
  g_hi = above - e_hi
  # Levels overflow to inf for huge b; inf - inf is nan.
  if not (0 < g_lo < math.inf and 0 < g_hi < math.inf):
    raise ConstructionError(
        f'Island {island.levels} has a degenerate neighbouring gap at b={b} '
        f'(gaps {g_lo:.3g}, {g_hi:.3g})')
  return GapFunction(lower=(below + margin * g_lo, e_lo - margin * g_lo),
                     upper=(e_hi + margin * g_hi, above - margin * g_hi))


@dataclass(frozen=True)
class AlmostAnalyticExtension:
  """
  Almost-analytic extension f_N of a test function.

  Attributes:
    f: The real test function
    N: Order of the Taylor polynomial in i z2
    decay_constant: Sampled sup of |dbar f_N| <z1>^N / |z2|^N, with dbar
      the full (d/dz1 + i d/dz2)
  """
  f: TestFunction
  N: int
  decay_constant: float

  def _series(self, z1: np.ndarray,
              z2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    iz2 = 1j * z2
    series = np.zeros(np.broadcast(z1, z2).shape, dtype=complex)
    power = np.ones_like(series)
    for j in range(self.N + 1):
      series += self.f.derivative(z1, j) * power / math.factorial(j)
      if j < self.N:
        power = power * iz2
    return series, power

  def eval(self, z: np.ndarray | complex) -> np.ndarray:
    """f_N(z); equals f on the real axis and vanishes for |Im z| >= 1."""
    z = np.asarray(z, dtype=complex)
    g, _ = cutoff(z.imag)
    series, _ = self._series(z.real, z.imag)
    return g * series

  def dbar(self, z: np.ndarray | complex) -> np.ndarray:
    """
    (d/dz1 + i d/dz2) f_N without the Wirtinger factor 1/2:
    g f^(N+1)(z1) (i z2)^N / N! + i g'(z2) sum_j f^(j)(z1) (i z2)^j / j!.
    """
    z = np.asarray(z, dtype=complex)
    return self.dbar_parts(z.real, z.imag)

  def dbar_parts(self, z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    g, dg = cutoff(z2)
    series, power = self._series(z1, z2)
    top = self.f.derivative(z1, self.N + 1) * power / math.factorial(self.N)
    return g * top + 1j * dg * series


def almost_analytic_extension(f: TestFunction,
                              N: int) -> AlmostAnalyticExtension:
  """
  Build f_N and estimate its decay constant C_N on a sample grid.

  Raises:
    PreconditionError: If N < 1
    AccuracyError: If derivatives of f up to order N+1 are not finite
  """
  if N < 1:
    raise PreconditionError(f'Extension order N must be >= 1, got {N}')
  lo, hi = f.window()
  z1 = np.linspace(lo - 1.0, hi + 1.0, 201)
  for order in range(N + 2):
    if not np.all(np.isfinite(f.derivative(z1, order))):
      raise AccuracyError(
          f'Derivative of order {order} of {f.name} is not finite on its '
          'window')

  ext = AlmostAnalyticExtension(f=f, N=N, decay_constant=0.0)
  z2 = np.geomspace(1e-3, 1.0, 40)
  zz1, zz2 = np.meshgrid(z1, z2)
  ratio = (np.abs(ext.dbar_parts(zz1, zz2)) *
           (1.0 + zz1 * zz1)**(N / 2) / zz2**N)
  constant = float(np.max(ratio))
  logger.debug('Almost-analytic extension of %s with N=%d: C_N = %.4g', f.name,
               N, constant)
  return AlmostAnalyticExtension(f=f, N=N, decay_constant=constant)


def _gauss_panels(lo: float, hi: float,
                  width: float) -> tuple[np.ndarray, np.ndarray]:
  """Gauss-Legendre nodes and weights on [lo, hi] split into panels <= width."""
  count = max(1, math.ceil((hi - lo) / width - 1e-12))
  edges = np.linspace(lo, hi, count + 1)
  half = 0.5 * np.diff(edges)
  mid = 0.5 * (edges[:-1] + edges[1:])
  nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
  weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
  return nodes, weights


def _band(window: tuple[float, float],
          m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
  """
  Tensor Gauss-Legendre nodes of one z2 band.

  Band 0 is [1/2, 1] and carries the cutoff ramp; band m >= 1 covers
  [2^-(m+1), 2^-m] with z1 panels of width min(1/16, 2^-m).
  """
  lo, hi = window
  if m == 0:
    z1, w1 = _gauss_panels(lo, hi, _Z1_PANEL)
    z2, w2 = _gauss_panels(0.5, 1.0, 0.5 / _TOP_PANELS)
  else:
    z1, w1 = _gauss_panels(lo, hi, min(_Z1_PANEL, 2.0**-m))
    z2, w2 = _gauss_panels(2.0**-(m + 1), 2.0**-m, 2.0**-(m + 1))
  return (np.repeat(z1, z2.size), np.tile(z2, z1.size),
          np.outer(w1, w2).ravel())


def _weighted_resolvent_sum(
    sub: np.ndarray,
    diag: np.ndarray,
    sup: np.ndarray,
    z: np.ndarray,
    c: np.ndarray,
) -> np.ndarray:
  """
  sum_k c_k (T - z_k)^-1 for a tridiagonal T by batched LU without pivoting.

  Im z_k != 0 keeps every pivot of the Hermitian shift away from zero.
  """
  n = diag.size
  k = z.size
  pivots = np.empty((k, n), dtype=complex)
  upper = np.empty((k, n), dtype=complex)
  rhs = np.zeros((k, n, n), dtype=complex)
  rhs[:, np.arange(n), np.arange(n)] = c[:, None]

  pivots[:, 0] = diag[0] - z
  for i in range(1, n):
    factor = sub[i - 1] / pivots[:, i - 1]
    pivots[:, i] = diag[i] - z - factor * sup[i - 1]
    rhs[:, i, :] -= factor[:, None] * rhs[:, i - 1, :]
  upper[:, :n - 1] = sup[None, :]

  solution = np.empty_like(rhs)
  solution[:, n - 1, :] = rhs[:, n - 1, :] / pivots[:, n - 1, None]
  for i in range(n - 2, -1, -1):
    solution[:, i, :] = (rhs[:, i, :] - upper[:, i, None] *
                         solution[:, i + 1, :]) / pivots[:, i, None]
  return solution.sum(axis=0)


def _check_matrix(A: np.ndarray) -> np.ndarray:
  A = np.atleast_2d(np.asarray(A))
  if A.ndim != 2 or A.shape[0] != A.shape[1]:
    raise DomainError(f'Matrix must be square, got shape {A.shape}')
  if A.shape[0] > MAX_HS_DIMENSION:
    raise PreconditionError(
        f'Matrix dimension {A.shape[0]} exceeds {MAX_HS_DIMENSION}')
  if not np.all(np.isfinite(A)):
    raise DomainError('Matrix entries must be finite')
  if not np.allclose(A, A.conj().T, atol=1e-12 * max(1.0, np.abs(A).max())):
    raise DomainError('Matrix must be self-adjoint')
  return A


def hs_functional_calculus(
    A: np.ndarray,
    f: TestFunction,
    N: int = DEFAULT_ORDER,
    depth: int = DEFAULT_DEPTH,
    jobs: int = 1,
    tol: float = HS_TOLERANCE,
    max_depth: int = MAX_DEPTH,
) -> ComputeOutput[np.ndarray]:
  """
  f(A) by Helffer-Sjostrand quadrature with an error estimate.

  A is reduced once to tridiagonal form A = Q T Q^H. The integral over
  0 < z2 <= 1 uses dyadic bands refined toward the real axis; for real A the
  lower half plane contributes the complex conjugate. After the first depth
  bands, deeper bands are added until the newest one contributes at most tol.
  That last contribution is reported as the error estimate.

  Args:
    A: Self-adjoint matrix (dimension <= 512)
    f: Test function
    N: Extension order (>= 3)
    depth: Dyadic bands always integrated (>= 2)
    jobs: Worker threads for the node batches
    tol: Largest accepted contribution of the deepest band
    max_depth: Deepest band tried before giving up

  Returns:
    ComputeOutput with f(A) and diag abs_error_estimate, nodes, N, depth

  Raises:
    PreconditionError: If N < 3, depth is outside [2, max_depth] or A is too
      large
    ConvergenceError: If band max_depth still contributes more than tol
  """
  if N < 3:
    raise PreconditionError(f'Helffer-Sjostrand order N must be >= 3, got {N}')
  if not 2 <= depth <= max_depth:
    raise PreconditionError(
        f'Quadrature depth must be in [2, {max_depth}], got {depth}')
  A = _check_matrix(A)
  ext = almost_analytic_extension(f, N)
  real = not np.iscomplexobj(A) or np.all(A.imag == 0)
  if real:
    A = np.real(A).astype(float)

  T, Q = hessenberg(A, calc_q=True)
  diag = np.real(np.diag(T)).astype(complex)
  sub = np.diag(T, -1).astype(complex)
  sup = np.diag(T, 1).astype(complex)
  n = diag.size
  batch = max(1, _MAX_BATCH_ENTRIES // (n * n))

  def to_matrix(s: np.ndarray) -> np.ndarray:
    if real:
      return (Q @ s.real @ Q.T) / math.pi
    return (Q @ s @ Q.conj().T) / (2.0 * math.pi)

  window = f.window()
  total = np.zeros((n, n), dtype=complex)
  used = 0
  m = 0
  while True:
    z1, z2, w = _band(window, m)
    if not real:
      z1 = np.concatenate([z1, z1])
      w = np.concatenate([w, w])
      z2 = np.concatenate([z2, -z2])
    coeff = w * ext.dbar_parts(z1, z2)
    keep = coeff != 0
    z = (z1 + 1j * z2)[keep]
    coeff = coeff[keep]
    used += int(z.size)
    chunks = [(s, min(s + batch, z.size)) for s in range(0, z.size, batch)]
    parts = ordered_map(
        lambda se: _weighted_resolvent_sum(sub, diag, sup, z[se[0]:se[1]],
                                           coeff[se[0]:se[1]]), chunks, jobs)
    band = sum(parts, np.zeros((n, n), dtype=complex))
    total += band
    estimate = float(np.max(np.abs(to_matrix(band))))
    if m >= depth and (estimate <= tol or m >= max_depth):
      break
    m += 1

  logger.debug('HS calculus: dim=%d N=%d depth=%d nodes=%d estimate=%.2e', n,
               N, m, used, estimate)
  if estimate > tol:
    raise ConvergenceError(
        f'Helffer-Sjostrand quadrature did not converge near the real axis: '
        f'estimate {estimate:.2e} > {tol} at depth {m}',
        estimate=estimate,
        diagnostics={
            'N': N,
            'depth': m
        })
  return ComputeOutput(value=to_matrix(total),
                       diag={
                           'abs_error_estimate': estimate,
                           'nodes': used,
                           'N': N,
                           'depth': m,
                           'decay_constant': ext.decay_constant,
                       })


def hs_matrix_function(
    A: np.ndarray,
    f: TestFunction,
    N: int = DEFAULT_ORDER,
) -> np.ndarray:
  """f(A) = (1/(2 pi)) int dbar f_N(z) (A - z)^-1 dz1 dz2, A self-adjoint."""
  return hs_functional_calculus(A, f, N).value


def eigen_matrix_function(A: np.ndarray, f: TestFunction) -> np.ndarray:
  """f(A) from the eigendecomposition of a self-adjoint matrix."""
  A = _check_matrix(A)
  values, vectors = np.linalg.eigh(A)
  result = (vectors * f(values)[None, :]) @ vectors.conj().T
  return result.real if not np.iscomplexobj(A) else result


def commutator_norm(A: np.ndarray, F: np.ndarray) -> float:
  """Spectral norm of [A, F]."""
  return float(np.linalg.norm(A @ F - F @ A, ord=2))


def level_values(f: TestFunction, energies: Sequence[float]) -> np.ndarray:
  """f evaluated on a list of energies."""
  return np.asarray(f(np.asarray(energies, dtype=float)), dtype=float)
