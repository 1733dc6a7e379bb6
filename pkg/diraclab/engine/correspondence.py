"""
Bulk and edge sides of the quantum Hall correspondence for Dirac-Landau levels.

Bulk side: trace functionals (b/2 pi) sum_k f(e_k) over the levels
e_k = sgn(k) sqrt(2|k|b), their b-derivative, the integrated density of
states N b / 2 pi of an island and its Streda slope. Edge side: the current
trace -(1/2 pi) sum_k int f'(lambda_k(xi)) lambda_k'(xi) dxi over traced
dispersion branches and the spectral flow through a gap. The Chern character
of the zero-mode projection is also computed directly from its kernel.
"""

from collections.abc import Sequence
import logging
import math
from typing import Optional

import numpy as np
import pandas as pd
from scipy.interpolate import CubicHermiteSpline

from diraclab.domain.errors import AmbiguousCrossingError
from diraclab.domain.errors import ConstructionError
from diraclab.domain.errors import ConvergenceError
from diraclab.domain.errors import CoverageError
from diraclab.domain.errors import DomainError
from diraclab.domain.errors import PreconditionError
from diraclab.domain.errors import TruncationError
from diraclab.domain.types import ComputeOutput
from diraclab.domain.types import CorrespondenceReport
from diraclab.domain.types import DispersionBranch
from diraclab.domain.types import level_energy
from diraclab.domain.types import ProjectionKernel
from diraclab.domain.types import Region
from diraclab.domain.types import SpectralIsland
from diraclab.engine.edge_fiber import asymptotic_label
from diraclab.engine.edge_fiber import DEFAULT_GRID_N
from diraclab.engine.edge_fiber import trace_branches
from diraclab.engine.funcalc import DEFAULT_MARGIN
from diraclab.engine.funcalc import hs_matrix_function
from diraclab.engine.funcalc import make_gap_function
from diraclab.functions.base import TestFunction
from diraclab.shared.parallel import ordered_map

logger = logging.getLogger(__name__)

TAIL_TOL = 1e-14
LEVEL_CLEARANCE = 1e-6
VELOCITY_FLOOR = 1e-10
KERNEL_TRACE_TOL = 1e-8
IDEMPOTENCY_TOL = 1e-6
CHERN_QUAD_TOL = 1e-6
STREDA_STENCIL = (0.95, 1.0, 1.05)
DEFAULT_XI_STEP = 0.05
MAX_EXTENSIONS = 4

# Gaussian tails e^(-b r^2 / 4) below 1e-10 need r sqrt(b) >= this.
MIN_QUAD_RADIUS = math.sqrt(40.0 * math.log(10.0))
DEFAULT_QUAD_RADIUS = 10.0
QUAD_SPACING = 0.5

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _check_field(b: float) -> None:
  if not (math.isfinite(b) and b > 0):
    raise DomainError(f'Magnetic field b must be positive, got {b}')


def landau_levels(b: float, k_max: int) -> list[float]:
  """
  Dirac-Landau levels sgn(k) sqrt(2|k|b) for |k| <= k_max, sorted.

  Raises:
    DomainError: If b <= 0
    PreconditionError: If k_max < 0
  """
  _check_field(b)
  if k_max < 0:
    raise PreconditionError(f'k_max must be >= 0, got {k_max}')
  return [level_energy(k, b) for k in range(-k_max, k_max + 1)]


def spectrum_table(b: float, k_max: int) -> pd.DataFrame:
  """Levels as rows k, lambda for |k| <= k_max."""
  ks = list(range(-k_max, k_max + 1))
  return pd.DataFrame({'k': ks, 'lambda': landau_levels(b, k_max)})


def default_k_max(f: TestFunction, b: float) -> int:
  """Smallest k_max whose outermost levels lie outside the window of f."""
  lo, hi = f.window()
  reach = max(lo * lo, hi * hi)
  return max(1, math.ceil(reach / (2.0 * b)) + 1)


def _level_sums(
    f: TestFunction,
    b: float,
    k_max: Optional[int],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
  _check_field(b)
  if k_max is None:
    k_max = default_k_max(f, b)
  if k_max < 0:
    raise PreconditionError(f'k_max must be >= 0, got {k_max}')
  ks = np.arange(-k_max, k_max + 1)
  energies = np.sign(ks) * np.sqrt(2.0 * np.abs(ks) * b)
  return ks, energies, f(energies), k_max


def _check_tail(values: np.ndarray, total: float, k_max: int,
                what: str) -> None:
  tail = max(abs(float(values[0])), abs(float(values[-1])))
  if tail > 0 and tail > TAIL_TOL * abs(total):
    raise TruncationError(
        f'{what} does not decay: term at |k| = {k_max} is {tail:.3e}, '
        f'sum is {total:.3e}',
        estimate=tail,
        diagnostics={'k_max': k_max})


def bulk_trace(f: TestFunction, b: float, k_max: Optional[int] = None) -> float:
  """
  Bulk trace functional (b / 2 pi) sum_{|k| <= k_max} f(sgn(k) sqrt(2|k|b)).

  Args:
    f: Test function
    b: Magnetic field strength
    k_max: Level cutoff; None picks one from the window of f

  Raises:
    TruncationError: If the outermost terms exceed 1e-14 of the sum
  """
  _, _, values, k_max = _level_sums(f, b, k_max)
  total = float(np.sum(values))
  _check_tail(values, total, k_max, 'Bulk trace')
  return b * total / (2.0 * math.pi)


def bulk_trace_derivative(
    f: TestFunction,
    b: float,
    k_max: Optional[int] = None,
) -> float:
  """
  dB_f/db = (1/2 pi) sum_k [f(e_k) + f'(e_k) e_k / 2].

  Raises:
    TruncationError: If the outermost terms exceed 1e-14 of the sum
  """
  _, energies, values, k_max = _level_sums(f, b, k_max)
  terms = values + 0.5 * f.derivative(energies, 1) * energies
  total = float(np.sum(terms))
  _check_tail(np.abs(values) + np.abs(terms), total, k_max,
              'Bulk trace derivative')
  return total / (2.0 * math.pi)


def ids(island: SpectralIsland, b: float) -> float:
  """Integrated density of states N b / 2 pi of the island's projection."""
  _check_field(b)
  return island.N * b / (2.0 * math.pi)


def streda_slope(
    island: SpectralIsland,
    b_grid: Sequence[float],
) -> ComputeOutput[tuple[float, float]]:
  """
  Least-squares slope of ids over b_grid and the Chern estimate 2 pi slope.

  Returns:
    ComputeOutput with value (slope, chern_estimate) and diag residual (max
    deviation from the fitted line) and b_grid

  Raises:
    PreconditionError: If b_grid has fewer than 3 distinct points or a point
      where the island's gaps close (b <= 0)
  """
  bs = np.asarray(b_grid, dtype=float)
  if np.unique(bs).size < 3:
    raise PreconditionError(
        f'Streda fit needs at least 3 distinct field values, got {list(bs)}')
  if not np.all(np.isfinite(bs) & (bs > 0)):
    raise PreconditionError(
        f'Island {island.levels} gaps close on b_grid {list(bs)}')
  values = np.array([ids(island, float(b)) for b in bs])
  slope, intercept = np.polyfit(bs, values, 1)
  residual = float(np.max(np.abs(slope * bs + intercept - values)))
  return ComputeOutput(value=(float(slope), 2.0 * math.pi * float(slope)),
                       diag={
                           'residual': residual,
                           'b_grid': [float(b) for b in bs],
                       })


def _in_ramp(f: TestFunction, lam: float) -> bool:
  """True if f' may be nonzero at lam (inside supp f' but off the plateau)."""
  hull = f.derivative_support
  if hull is None or not hull[0] <= lam <= hull[1]:
    return False
  plateau = f.plateau
  return plateau is None or not plateau[0] < lam < plateau[1]


def branch_current(f: TestFunction, branch: DispersionBranch) -> float:
  """
  int f'(lambda(xi)) lambda'(xi) dxi along one branch.

  The branch is interpolated by a cubic Hermite spline through the samples
  and their velocities and integrated with 8-point Gauss-Legendre per sample
  interval. Telescopes to f(lambda(xi_max)) - f(lambda(xi_min)).
  """
  if len(branch.samples) < 2:
    raise CoverageError(f'Branch {branch.k} has fewer than two samples')
  xi = branch.xi
  spline = CubicHermiteSpline(xi, branch.lam, branch.velocity)
  half = 0.5 * np.diff(xi)
  mid = 0.5 * (xi[:-1] + xi[1:])
  nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
  weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
  integrand = f.derivative(spline(nodes), 1) * spline(nodes, 1)
  return float(np.sum(weights * integrand))


def _check_coverage(f: TestFunction, branches: Sequence[DispersionBranch],
                    b: float) -> None:
  labels = {branch.k for branch in branches}
  support = f.support
  if support is not None:
    k_reach = math.ceil(max(support[0]**2, support[1]**2) / (2.0 * b)) + 1
    missing = [
        k for k in range(-k_reach, k_reach + 1)
        if support[0] <= level_energy(k, b) <= support[1] and k not in labels
    ]
    if missing:
      raise CoverageError(
          f'Levels {missing} lie in the support of {f.name} but have no '
          'traced branch',
          diagnostics={'missing': missing})
  for branch in branches:
    for end, lam in (('left', branch.samples[0].lam),
                     ('right', branch.samples[-1].lam)):
      if _in_ramp(f, lam):
        raise CoverageError(
            f'Branch {branch.k} ends inside supp f\' at the {end} end '
            f'(lambda = {lam:.6f})',
            diagnostics={
                'k': branch.k,
                'end': end,
                'lam': lam
            })


def edge_current_terms(
    f: TestFunction,
    b: float,
    branches: Sequence[DispersionBranch],
) -> dict[int, float]:
  """
  Per-branch contributions -(1/2 pi) int f'(lambda_k) lambda_k' dxi.

  Raises:
    CoverageError: If a branch ends inside supp f' or a level in supp f has
      no branch
  """
  _check_field(b)
  if f.derivative_support is None:
    return {branch.k: 0.0 for branch in branches}
  _check_coverage(f, branches, b)
  return {
      branch.k: -branch_current(f, branch) / (2.0 * math.pi)
      for branch in branches
  }


def edge_current(
    f: TestFunction,
    b: float,
    branches: Sequence[DispersionBranch],
) -> float:
  """
  Edge current trace -(1/2 pi) sum_k int f'(lambda_k(xi)) v_k(xi) dxi.

  Raises:
    CoverageError: If the branches do not cover supp f'
  """
  terms = edge_current_terms(f, b, branches)
  return float(sum(terms[k] for k in sorted(terms)))


def _check_in_gap(mu: float, b: float) -> None:
  nearest = level_energy(asymptotic_label(b, mu), b)
  if abs(mu - nearest) <= LEVEL_CLEARANCE:
    raise PreconditionError(
        f'Energy {mu} is within {LEVEL_CLEARANCE} of the bulk level '
        f'{nearest:.6f}')


def spectral_flow(mu: float, branches: Sequence[DispersionBranch]) -> int:
  """
  Signed count of branch crossings through the energy mu.

  Each sign change of lambda_k - mu between samples counts with the sign of
  the change. A sample sitting exactly on mu counts by its velocity.

  Raises:
    PreconditionError: If mu is within 1e-6 of a bulk level
    AmbiguousCrossingError: If a branch touches mu with |velocity| < 1e-10
  """
  if not branches:
    return 0
  _check_in_gap(mu, branches[0].b)
  flow = 0
  for branch in branches:
    d = branch.lam - mu
    v = branch.velocity
    for i in range(d.size):
      if d[i] == 0.0:
        if abs(v[i]) < VELOCITY_FLOOR:
          raise AmbiguousCrossingError(
              f'Branch {branch.k} touches {mu} at xi={branch.xi[i]} with '
              f'velocity {v[i]:.3e}',
              estimate=abs(float(v[i])),
              diagnostics={
                  'k': branch.k,
                  'xi': float(branch.xi[i])
              })
        if 0 < i < d.size - 1:
          flow += 1 if v[i] > 0 else -1
      elif i + 1 < d.size and d[i] * d[i + 1] < 0:
        flow += 1 if d[i + 1] > d[i] else -1
  return flow


def island_gaps(island: SpectralIsland,
                b: float) -> tuple[tuple[float, float], tuple[float, float]]:
  """The bulk gaps just below and just above the island."""
  below = (level_energy(island.lo - 1, b), level_energy(island.lo, b))
  above = (level_energy(island.hi, b), level_energy(island.hi + 1, b))
  return below, above


def island_flow(
    island: SpectralIsland,
    b: float,
    branches: Sequence[DispersionBranch],
) -> int:
  """Spectral flow at mid upper gap minus flow at mid lower gap; equals N."""
  _check_field(b)
  below, above = island_gaps(island, b)
  return (spectral_flow(0.5 * (above[0] + above[1]), branches) -
          spectral_flow(0.5 * (below[0] + below[1]), branches))


def landau_ladder_matrix(b: float, k_max: int) -> np.ndarray:
  """
  Dirac-Landau operator in the Landau-level basis, truncated to |k| <= k_max.

  Index 0 is the zero mode; indices (2n - 1, 2n) hold the pair
  {|n> e1, |n-1> e2} coupled by sqrt(2nb). The eigenvalues are exactly the
  levels of landau_levels(b, k_max).
  """
  _check_field(b)
  if k_max < 0:
    raise PreconditionError(f'k_max must be >= 0, got {k_max}')
  matrix = np.zeros((2 * k_max + 1, 2 * k_max + 1))
  for n in range(1, k_max + 1):
    coupling = math.sqrt(2.0 * n * b)
    matrix[2 * n - 1, 2 * n] = matrix[2 * n, 2 * n - 1] = coupling
  return matrix


def bulk_trace_hs(f: TestFunction, b: float, k_max: int, N: int = 3) -> float:
  """Bulk trace (b / 2 pi) Tr f(ladder), f by Helffer-Sjostrand quadrature."""
  F = hs_matrix_function(landau_ladder_matrix(b, k_max), f, N)
  return b * float(np.trace(F)) / (2.0 * math.pi)


def _zero_mode_entry(x: np.ndarray, xp: np.ndarray, b: float) -> np.ndarray:
  """(b / 2 pi) e^(-ib (x1 - x1')(x2 + x2') / 2) e^(-b |x - x'|^2 / 4)."""
  d1 = x[..., 0] - xp[..., 0]
  d2 = x[..., 1] - xp[..., 1]
  phase = -0.5 * b * d1 * (x[..., 1] + xp[..., 1])
  return (b / (2.0 * math.pi)) * np.exp(1j * phase - 0.25 * b *
                                        (d1 * d1 + d2 * d2))


def _square_grid(center: np.ndarray, half_width: float,
                 spacing: float) -> np.ndarray:
  steps = math.ceil(half_width / spacing)
  offsets = spacing * np.arange(-steps, steps + 1)
  g1, g2 = np.meshgrid(offsets, offsets, indexing='ij')
  return center + np.stack([g1.ravel(), g2.ravel()], axis=-1)


def _idempotency_residual(b: float, x: np.ndarray, xp: np.ndarray) -> float:
  """|int P(x, y) P(y, x') dy - P(x, x')| by the trapezoidal rule."""
  spacing = QUAD_SPACING / math.sqrt(b)
  ys = _square_grid(0.5 * (x + xp), DEFAULT_QUAD_RADIUS / math.sqrt(b),
                    spacing)
  composed = np.sum(
      _zero_mode_entry(x[None, :], ys, b) *
      _zero_mode_entry(ys, xp[None, :], b)) * spacing**2
  return float(abs(composed - _zero_mode_entry(x, xp, b)))


def zero_mode_projection_kernel(b: float, checks: int = 6) -> ProjectionKernel:
  """
  Kernel of the projection onto the zero-energy Landau level.

  The zero modes live in the first spinor component; the (1, 1) entry is
  (b / 2 pi) e^(-ib (x1 - x1')(x2 + x2') / 2) e^(-b |x - x'|^2 / 4), the
  Landau-gauge phase being the straight-line circulation of the vector
  potential. Idempotency and the diagonal trace b / 2 pi are checked on
  deterministic sample pairs before the kernel is returned.

  Raises:
    DomainError: If b <= 0
    ConstructionError: If an invariant check fails
  """
  _check_field(b)

  def kernel(x: np.ndarray, xp: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    entry = _zero_mode_entry(x, xp, b)
    out = np.zeros(entry.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = entry
    return out

  rng = np.random.default_rng(20240501)
  scale = 1.0 / math.sqrt(b)
  xs = rng.uniform(-2.0, 2.0, size=(checks, 2)) * scale
  xps = xs + rng.uniform(-1.0, 1.0, size=(checks, 2)) * scale
  diagonal = np.trace(kernel(xs, xs), axis1=-2, axis2=-1)
  trace_err = float(np.max(np.abs(diagonal - b / (2.0 * math.pi))))
  idem_err = max(_idempotency_residual(b, x, xp) for x, xp in zip(xs, xps))
  diag = {'trace_residual': trace_err, 'idempotency_residual': idem_err}
  logger.debug('Zero-mode kernel at b=%g: %s', b, diag)
  if trace_err > KERNEL_TRACE_TOL:
    raise ConstructionError(
        f'Zero-mode kernel diagonal trace off by {trace_err:.3e}')
  if idem_err > IDEMPOTENCY_TOL * b / (2.0 * math.pi):
    raise ConstructionError(
        f'Zero-mode kernel is not idempotent: residual {idem_err:.3e}')
  return ProjectionKernel(b=b, kernel=kernel, diag=diag)


def ids_from_kernel(kernel: ProjectionKernel,
                    region: Optional[Region] = None) -> float:
  """
  (1 / |region|) int tr P(x, x) dx by tensor Gauss-Legendre.

  Raises:
    PreconditionError: If the region is unbounded
  """
  region = region or Region()
  (a1, b1), (a2, b2) = region.bounds()
  if not math.isfinite(b2):
    raise PreconditionError(f'Region {region.kind} is unbounded')
  x1 = 0.5 * (a1 + b1) + 0.5 * (b1 - a1) * _GL_NODES
  x2 = 0.5 * (a2 + b2) + 0.5 * (b2 - a2) * _GL_NODES
  w = np.outer(0.5 * (b1 - a1) * _GL_WEIGHTS, 0.5 * (b2 - a2) * _GL_WEIGHTS)
  g1, g2 = np.meshgrid(x1, x2, indexing='ij')
  points = np.stack([g1, g2], axis=-1)
  traces = np.trace(kernel.kernel(points, points), axis1=-2, axis2=-1)
  return float(np.real(np.sum(w * traces))) / region.area


def _chern_at(kernel: ProjectionKernel, x: np.ndarray, radius: float,
              spacing: float) -> complex:
  """2 pi i sum P(x,y) P(y,w) P(w,x) (y - x) x (w - x) over a disk grid."""
  ys = _square_grid(x, radius, spacing)
  u = ys - x
  ys = ys[np.hypot(u[:, 0], u[:, 1]) <= radius]
  u = ys - x
  b = kernel.b
  first = kernel.kernel(np.broadcast_to(x, ys.shape), ys)[:, 0, 0]
  middle = _zero_mode_entry(ys[:, None, :], ys[None, :, :], b)
  last = kernel.kernel(ys, np.broadcast_to(x, ys.shape))[:, 0, 0]
  cross = np.outer(u[:, 0], u[:, 1]) - np.outer(u[:, 1], u[:, 0])
  total = np.einsum('j,jl,l,jl->', first, middle, last, cross)
  return 2.0 * math.pi * 1j * complex(total) * spacing**4


def chern_zero_mode(
    b: float,
    quad_radius: Optional[float] = None,
    jobs: int = 1,
) -> ComputeOutput[float]:
  """
  Chern character 2 pi int_Omega tr(i P [[X1, P], [X2, P]])(x, x) dx.

  The double commutator at x reduces to
  2 pi i int int P(x,y) P(y,w) P(w,x) (y - x) x (w - x) dy dw, evaluated on a
  uniform disk grid of spacing 0.5 / sqrt(b) centred at x. The x integral
  over the unit cell uses 2 x 2 Gauss-Legendre points.

  Args:
    b: Magnetic field strength
    quad_radius: Disk radius; defaults to 10 / sqrt(b)
    jobs: Worker threads for the unit-cell points

  Returns:
    ComputeOutput with the Chern character and diag abs_error_estimate
    (change under a 1.25x coarser grid), imag_part, quad_radius

  Raises:
    PreconditionError: If the Gaussian tail at quad_radius exceeds 1e-10
    ConvergenceError: If the two grids disagree by more than 1e-6
  """
  kernel = zero_mode_projection_kernel(b)
  root_b = math.sqrt(b)
  radius = DEFAULT_QUAD_RADIUS / root_b if quad_radius is None else quad_radius
  if radius * root_b < MIN_QUAD_RADIUS:
    raise PreconditionError(
        f'quad_radius {radius} leaves Gaussian tails above 1e-10; use at '
        f'least {MIN_QUAD_RADIUS / root_b:.3f}')
  spacing = QUAD_SPACING / root_b
  nodes, weights = np.polynomial.legendre.leggauss(2)
  cell = [(np.array([0.5 + 0.5 * s, 0.5 + 0.5 * t]), 0.25 * ws * wt)
          for s, ws in zip(nodes, weights)
          for t, wt in zip(nodes, weights)]

  def at(point: tuple[np.ndarray, float]) -> tuple[complex, complex]:
    x, _ = point
    return (_chern_at(kernel, x, radius, spacing),
            _chern_at(kernel, x, radius, 1.25 * spacing))

  values = ordered_map(at, cell, jobs)
  fine = sum(w * v[0] for (_, w), v in zip(cell, values))
  coarse = sum(w * v[1] for (_, w), v in zip(cell, values))
  estimate = abs(fine - coarse)
  diag = {
      'abs_error_estimate': estimate,
      'imag_part': fine.imag,
      'quad_radius': radius,
      'spacing': spacing,
  }
  logger.debug('Chern character at b=%g: %.12f (%s)', b, fine.real, diag)
  if estimate > CHERN_QUAD_TOL or abs(fine.imag) > CHERN_QUAD_TOL:
    raise ConvergenceError(
        f'Chern quadrature did not converge: estimate {estimate:.2e}, '
        f'imaginary part {fine.imag:.2e}',
        estimate=estimate,
        diagnostics=diag)
  return ComputeOutput(value=fine.real, diag=diag)


def report_branch_labels(island: SpectralIsland, f: TestFunction,
                         b: float) -> list[int]:
  """
  Branches the bulk-edge report traces.

  Positive branches 0..hi when hi >= 0; negative branches -1 down to
  min(lo, -1) - 1 when supp f reaches below 0.
  """
  labels = list(range(0, island.hi + 1)) if island.hi >= 0 else []
  support = f.support
  if support is not None and support[0] < 0:
    labels = list(range(min(island.lo, -1) - 1, 0)) + labels
  return labels


def _clears(f: TestFunction, lam: float) -> bool:
  hull = f.derivative_support
  return hull is None or lam < hull[0] or lam > hull[1]


def trace_report_branches(
    island: SpectralIsland,
    f: TestFunction,
    b: float,
    xi_step: float = DEFAULT_XI_STEP,
    grid_n: int = DEFAULT_GRID_N,
    jobs: int = 1,
) -> list[DispersionBranch]:
  """
  Trace the report branches until every right end clears supp f'.

  The sweep starts at -6 sqrt(b max|k|) - 4 and ends at 4 sqrt(b), extended
  by 4 sqrt(b) at most four times.

  Raises:
    CoverageError: If a branch still sits in supp f' after the extensions
  """
  labels = report_branch_labels(island, f, b)
  k_abs = max(1, max(abs(k) for k in labels))
  start = -6.0 * math.sqrt(b * k_abs) - 4.0
  stop = 4.0 * math.sqrt(b)
  for extension in range(MAX_EXTENSIONS + 1):
    branches = trace_branches(b, (start, stop, xi_step), labels, jobs=jobs,
                              grid_n=grid_n)
    open_ends = [br.k for br in branches if not _clears(f, br.samples[-1].lam)]
    if not open_ends:
      return branches
    logger.info('Branches %s still inside supp f\' at xi=%.2f (extension %d)',
                open_ends, stop, extension)
    stop += 4.0 * math.sqrt(b)
  raise CoverageError(
      f'Branches {open_ends} do not clear supp f\' by xi={stop:.2f}',
      diagnostics={'branches': open_ends})


def bulk_edge_report(
    island: SpectralIsland,
    b: float,
    margin: float = DEFAULT_MARGIN,
    branches: Optional[Sequence[DispersionBranch]] = None,
    xi_step: float = DEFAULT_XI_STEP,
    grid_n: int = DEFAULT_GRID_N,
    jobs: int = 1,
    tol_bulk_edge: float = 1e-3,
    tol_streda: float = 1e-9,
) -> CorrespondenceReport:
  """
  Compare the bulk and edge sides for one island at field b.

  bulk_value is dB_f/db for the island's gap function f, edge_value the edge
  current over the traced branches. The Streda slope uses the stencil
  b (0.95, 1, 1.05); the spectral flow is island_flow.

  Args:
    island: Contiguous Landau indices
    b: Magnetic field strength
    margin: Gap-function margin
    branches: Pre-traced branches; traced here when None
    xi_step: Sweep step for tracing
    grid_n: Base grid for tracing
    jobs: Worker threads
    tol_bulk_edge: Relative tolerance of bulk vs edge
    tol_streda: Tolerance of the Chern estimate vs N

  Returns:
    CorrespondenceReport with the pass flag set
  """
  f = make_gap_function(island, b, margin)
  if branches is None:
    branches = trace_report_branches(island, f, b, xi_step, grid_n, jobs)
  branches = list(branches)

  bulk_value = bulk_trace_derivative(f, b)
  terms = edge_current_terms(f, b, branches)
  edge_value = float(sum(terms[k] for k in sorted(terms)))
  streda = streda_slope(island, [b * s for s in STREDA_STENCIL])
  slope, chern = streda.value
  flow = island_flow(island, b, branches)

  expected = island.N / (2.0 * math.pi)
  abs_err = abs(bulk_value - edge_value)
  rel_err = abs_err / abs(bulk_value)
  passed = (rel_err <= tol_bulk_edge and abs(chern - island.N) <= tol_streda and
            flow == island.N and
            abs(bulk_value - expected) <= tol_bulk_edge / (2.0 * math.pi))
  report = CorrespondenceReport(
      b=b,
      island=island.levels,
      bulk_value=bulk_value,
      edge_value=edge_value,
      streda_slope=slope,
      chern_estimate=chern,
      spectral_flow=flow,
      abs_err=abs_err,
      rel_err=rel_err,
      tolerances={
          'bulk_edge': tol_bulk_edge,
          'streda': tol_streda
      },
      diagnostics={
          'branch_terms': {str(k): terms[k] for k in sorted(terms)},
          'xi_range': [branches[0].samples[0].xi, branches[0].samples[-1].xi],
          'streda_residual': streda.diag['residual'],
          'gap_function': f.describe(),
      },
      passed=passed)
  log = logger.info if passed else logger.warning
  log('Bulk-edge report for island %s at b=%g: bulk %.6f edge %.6f flow %d',
      island.levels, b, bulk_value, edge_value, flow)
  return report
