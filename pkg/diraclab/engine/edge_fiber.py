"""
Edge fiber operator h(xi) = -i d/dx sigma2 + (b x + xi) sigma1 on [0, inf).

The boundary condition psi1(0) = psi2(0) makes h(xi) self-adjoint with purely
discrete spectrum. Two backends solve it:

- grid: staggered mass-lumped discretization on a truncated box, a symmetric
  tridiagonal eigenproblem Richardson-extrapolated over three grids;
- secular: the supersymmetric reduction to parabolic cylinder functions, whose
  roots in lambda are the eigenvalues.

Branches lambda_k(xi) are traced by continuity over a xi sweep, labeled by
their bulk level sgn(k) sqrt(2|k|b) as xi -> -inf.
"""

from abc import ABC
from abc import abstractmethod
from collections.abc import Sequence
import logging
import math
from typing import Optional

import numpy as np
import pandas as pd
from scipy.interpolate import make_interp_spline
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq
from scipy.optimize import minimize_scalar

from diraclab.domain.errors import AccuracyError
from diraclab.domain.errors import ConsistencyError
from diraclab.domain.errors import ConvergenceError
from diraclab.domain.errors import ContinuationError
from diraclab.domain.errors import DomainError
from diraclab.domain.errors import LabelingError
from diraclab.domain.errors import PreconditionError
from diraclab.domain.errors import RangeError
from diraclab.domain.errors import ResolutionError
from diraclab.domain.errors import TruncationError
from diraclab.domain.types import BranchSample
from diraclab.domain.types import ComputeOutput
from diraclab.domain.types import DispersionBranch
from diraclab.domain.types import EdgeEigenpair
from diraclab.domain.types import FiberProblem
from diraclab.domain.types import GridSpec
from diraclab.engine.specfun import integrate_u
from diraclab.engine.specfun import U_MAX_ARGUMENT
from diraclab.engine.specfun import U_MAX_ORDER
from diraclab.shared.parallel import ordered_map

logger = logging.getLogger(__name__)

DEFAULT_GRID_N = 1024
MAX_COUNT = 40
RICHARDSON_TOL = 1e-5
BOUNDARY_MASS_TOL = 1e-10
SECULAR_EXCLUSION = 1e-4
SECULAR_SCAN_STEP = 0.02
SECULAR_XTOL = 1e-12
MATCH_FRACTION = 0.25
_REFINE_FRACTION = 0.4
_WINDOW_GROWTH = 1.5
# Eigenvalue accuracy on the far-left plateau of a branch.
MONOTONE_SLACK = 1e-7


def fiber_matrix(
    p: FiberProblem,
    grid: GridSpec,
) -> tuple[np.ndarray, np.ndarray]:
  """
  Symmetric tridiagonal matrix of the staggered scheme on grid.n cells.

  Unknowns are interleaved as (psi1_0, psi2_1/2, psi1_1, ..., psi2_n-1/2,
  psi1_n) and scaled by the square roots of the lumped mass weights (h/2 at
  both ends, h elsewhere), so the eigenvalues of the returned matrix are the
  discrete eigenvalues of h(xi). The quadratic form is
  psi1(0)^2 + 2 sum_j h psi2_j+1/2 (D psi1 + V psi1)_j+1/2; its natural
  boundary conditions are psi1(0) = psi2(0) and psi2(x_max) = 0.

  Args:
    p: Fiber problem
    grid: Box and cell count

  Returns:
    Tuple (diagonal, off_diagonal) of lengths 2n+1 and 2n
  """
  n = grid.n
  h = grid.x_max / n
  v_half = p.b * (np.arange(n) + 0.5) * h + p.xi
  weights = np.full(n + 1, h)
  weights[0] = weights[-1] = 0.5 * h

  diagonal = np.zeros(2 * n + 1)
  diagonal[0] = 1.0 / weights[0]
  off = np.empty(2 * n)
  off[0::2] = (-1.0 + 0.5 * h * v_half) / np.sqrt(weights[:-1] * h)
  off[1::2] = (1.0 + 0.5 * h * v_half) / np.sqrt(weights[1:] * h)
  return diagonal, off


def _sqrt_weights(n: int, h: float) -> np.ndarray:
  sw = np.full(2 * n + 1, math.sqrt(h))
  sw[0] = sw[-1] = math.sqrt(0.5 * h)
  return sw


def _eigenvalues(
    d: np.ndarray,
    e: np.ndarray,
    lo: float,
    hi: float,
) -> np.ndarray:
  return eigh_tridiagonal(d,
                          e,
                          eigvals_only=True,
                          select='v',
                          select_range=(lo, hi))


def _nearest_pair(
    d: np.ndarray,
    e: np.ndarray,
    target: float,
    halfwidth: float,
) -> tuple[float, np.ndarray]:
  """Eigenvalue nearest target inside target +- halfwidth with its vector."""
  values = _eigenvalues(d, e, target - halfwidth, target + halfwidth)
  if values.size == 0:
    raise ResolutionError(
        f'No eigenvalue within {halfwidth:.3g} of {target:.6g} on the refined '
        'grid',
        diagnostics={'target': target})
  values, vectors = eigh_tridiagonal(d,
                                     e,
                                     select='v',
                                     select_range=(target - halfwidth,
                                                   target + halfwidth))
  i = int(np.argmin(np.abs(values - target)))
  return float(values[i]), vectors[:, i]


def _tridiagonal_residual(
    d: np.ndarray,
    e: np.ndarray,
    v: np.ndarray,
    lam: float,
) -> float:
  tv = d * v
  tv[:-1] += e * v[1:]
  tv[1:] += e * v[:-1]
  return float(np.max(np.abs(tv - lam * v)))


def node_values(psi1: np.ndarray,
                psi2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
  """
  Both spinor components on the interior nodes of a staggered grid.

  psi2 at a node is the mean of its two half-node neighbours.
  """
  return psi1[1:-1], 0.5 * (psi2[:-1] + psi2[1:])


def continuum_residual(
    p: FiberProblem,
    lam: float,
    x: np.ndarray,
    psi1: np.ndarray,
    psi2: np.ndarray,
) -> float:
  """
  Relative residual of the fiber ODE for node samples of an eigenfunction.

  The equations are -psi2' + V psi2 = lam psi1 and psi1' + V psi1 = lam psi2
  with V = b x + xi. Derivatives come from quintic interpolating splines.

  Args:
    p: Fiber problem
    lam: Eigenvalue
    x: Uniform nodes (at least six)
    psi1: First component on x
    psi2: Second component on x

  Returns:
    ||(h - lam) psi||_2 / (1 + |lam|) over the sampled nodes
  """
  step = float(x[1] - x[0])
  v = p.b * x + p.xi
  d1 = make_interp_spline(x, psi1, k=5).derivative()(x)
  d2 = make_interp_spline(x, psi2, k=5).derivative()(x)
  r1 = -d2 + v * psi2 - lam * psi1
  r2 = d1 + v * psi1 - lam * psi2
  return float(math.sqrt(step * np.sum(r1**2 + r2**2)) / (1.0 + abs(lam)))


def _extrapolated_residual(
    p: FiberProblem,
    lam: float,
    x_mid: np.ndarray,
    mid: tuple[np.ndarray, np.ndarray],
    fine: tuple[np.ndarray, np.ndarray],
) -> float:
  """Continuum residual of the Richardson-combined eigenfunction."""
  mid1, mid2 = node_values(*mid)
  fine1, fine2 = node_values(*fine)
  # Mid-grid nodes are the even fine nodes.
  psi1 = (4.0 * fine1[1::2] - mid1) / 3.0
  psi2 = (4.0 * fine2[1::2] - mid2) / 3.0
  return continuum_residual(p, lam, x_mid[1:-1], psi1, psi2)


def _split(v: np.ndarray, n: int, h: float) -> tuple[np.ndarray, np.ndarray]:
  u = v / _sqrt_weights(n, h)
  psi1, psi2 = u[0::2], u[1::2]
  # Fix the sign by the largest node value.
  if psi1[np.argmax(np.abs(psi1))] < 0:
    psi1, psi2 = -psi1, -psi2
  return psi1, psi2


def _discrete_velocity(psi1: np.ndarray, psi2: np.ndarray, h: float) -> float:
  """Exact d lambda / d xi of the discrete eigenvalue."""
  return float(h * np.sum(psi2 * (psi1[:-1] + psi1[1:])))


def _halfwidths(spectrum: np.ndarray, indices: Sequence[int],
                b: float) -> list[float]:
  widths = []
  for i in indices:
    gaps = []
    if i > 0:
      gaps.append(spectrum[i] - spectrum[i - 1])
    if i + 1 < spectrum.size:
      gaps.append(spectrum[i + 1] - spectrum[i])
    widths.append(_REFINE_FRACTION * min(gaps) if gaps else 0.5 * math.sqrt(b))
  return widths


def _refine(
    p: FiberProblem,
    grid: GridSpec,
    spectrum: np.ndarray,
    indices: Sequence[int],
) -> list[EdgeEigenpair]:
  """
  Richardson-extrapolated eigenpairs for selected base-grid eigenvalues.

  Args:
    p: Fiber problem
    grid: Base grid (n cells); 2n and 4n are derived from it
    spectrum: Sorted base-grid eigenvalues
    indices: Positions in spectrum to refine

  Returns:
    Eigenpairs in the order of indices

  Raises:
    ResolutionError: If the two Richardson extrapolants disagree
    TruncationError: If an eigenfunction has mass at the box end
  """
  n = grid.n
  mid = GridSpec(grid.x_max, 2 * n)
  fine = GridSpec(grid.x_max, 4 * n)
  d_mid, e_mid = fiber_matrix(p, mid)
  d_fine, e_fine = fiber_matrix(p, fine)
  h_mid = grid.x_max / (2 * n)
  h_fine = grid.x_max / (4 * n)
  x_mid = np.linspace(0.0, grid.x_max, 2 * n + 1)
  x = np.linspace(0.0, grid.x_max, 4 * n + 1)
  x_half = (np.arange(4 * n) + 0.5) * h_fine
  tail = x > grid.x_max - 1.0 / math.sqrt(p.b)
  tail_half = x_half > grid.x_max - 1.0 / math.sqrt(p.b)

  pairs = []
  for i, width in zip(indices, _halfwidths(spectrum, indices, p.b)):
    lam_base = float(spectrum[i])
    lam_mid, v_mid = _nearest_pair(d_mid, e_mid, lam_base, width)
    lam_fine, v_fine = _nearest_pair(d_fine, e_fine, lam_mid, width)

    coarse_extrapolant = (4.0 * lam_mid - lam_base) / 3.0
    lam = (4.0 * lam_fine - lam_mid) / 3.0
    disagreement = abs(lam - coarse_extrapolant)
    logger.debug('xi=%.4f lambda=%.10f richardson disagreement %.2e', p.xi,
                 lam, disagreement)
    if disagreement > RICHARDSON_TOL:
      raise ResolutionError(
          f'Grid n={n} too coarse for lambda={lam:.6f} at xi={p.xi}: '
          f'Richardson disagreement {disagreement:.2e} > {RICHARDSON_TOL}',
          estimate=disagreement,
          diagnostics={
              'xi': p.xi,
              'lambda': lam,
              'grid_n': n
          })

    psi1, psi2 = _split(v_fine, 4 * n, h_fine)
    mid_psi1, mid_psi2 = _split(v_mid, 2 * n, h_mid)
    boundary_mass = float(
        np.sum(psi1[tail]**2) * h_fine + np.sum(psi2[tail_half]**2) * h_fine)
    if boundary_mass > BOUNDARY_MASS_TOL:
      raise TruncationError(
          f'Box x_max={grid.x_max:.3f} too small for lambda={lam:.6f} at '
          f'xi={p.xi}: boundary mass {boundary_mass:.2e} > '
          f'{BOUNDARY_MASS_TOL}',
          estimate=boundary_mass,
          diagnostics={
              'xi': p.xi,
              'x_max': grid.x_max
          })

    v0 = p.b * 0.5 * h_fine + p.xi
    psi2_wall = (psi2[0] * (1.0 - 0.5 * h_fine * v0) +
                 0.5 * lam_fine * h_fine * psi1[0])
    pair = EdgeEigenpair(
        problem=p,
        lam=lam,
        x=x,
        psi1=psi1,
        x_half=x_half,
        psi2=psi2,
        bc_residual=abs(psi1[0] - psi2_wall),
        ode_residual=_extrapolated_residual(p, lam, x_mid, (mid_psi1, mid_psi2),
                                            (psi1, psi2)),
        norm=float(np.linalg.norm(v_fine)),
        velocity_coarse=_discrete_velocity(mid_psi1, mid_psi2, h_mid),
        diag={
            'richardson_disagreement': disagreement,
            'discrete_residual':
                _tridiagonal_residual(d_fine, e_fine, v_fine, lam_fine),
            'lambda_fine': lam_fine,
            'grid_n': n,
            'x_max': grid.x_max,
            'boundary_mass': boundary_mass,
        })
    violations = pair.invariant_violations()
    if violations:
      raise ResolutionError(
          f'Eigenpair at xi={p.xi}, lambda={lam:.6f} violates: ' +
          '; '.join(violations),
          diagnostics={'violations': violations})
    pairs.append(pair)
  return pairs


def _base_spectrum(p: FiberProblem, grid: GridSpec, bound: float) -> np.ndarray:
  d, e = fiber_matrix(p, grid)
  return _eigenvalues(d, e, -bound, bound)


def solve_fiber_grid(
    p: FiberProblem,
    g: GridSpec,
    count: int,
) -> list[EdgeEigenpair]:
  """
  The count eigenvalues of smallest |lambda| with normalized eigenfunctions.

  Args:
    p: Fiber problem
    g: Base grid; the solver also uses 2n and 4n cells on the same box
    count: Number of eigenpairs (1..40)

  Returns:
    Eigenpairs sorted by eigenvalue

  Raises:
    PreconditionError: If count is out of range
    ResolutionError: If the grid is too coarse
    TruncationError: If the box is too small
  """
  if not 1 <= count <= MAX_COUNT:
    raise PreconditionError(f'count must be in [1, {MAX_COUNT}], got {count}')

  bound = math.sqrt(2.0 * (count + 1) * p.b) + abs(p.xi) + math.sqrt(p.b)
  spectrum = _base_spectrum(p, g, bound)
  for _ in range(8):
    if spectrum.size >= count + 2:
      break
    bound *= _WINDOW_GROWTH
    spectrum = _base_spectrum(p, g, bound)
  if spectrum.size < count:
    raise TruncationError(
        f'Box x_max={g.x_max:.3f} holds only {spectrum.size} eigenvalues in '
        f'(-{bound:.3g}, {bound:.3g}); {count} requested')

  selected = sorted(int(i) for i in np.argsort(np.abs(spectrum))[:count])
  lambda_max = float(np.max(np.abs(spectrum[selected])))
  if not g.covers(p, lambda_max):
    logger.warning(
        'x_max=%.3f is below the decay margin %.3f for |lambda| <= %.3f; '
        'relying on the boundary mass check', g.x_max,
        GridSpec.required_x_max(p, lambda_max), lambda_max)
  return _refine(p, g, spectrum, selected)


def eigenpair_on_branch(
    p: FiberProblem,
    g: GridSpec,
    k: int,
    count: int = 8,
) -> EdgeEigenpair:
  """
  Eigenpair of branch k at a single xi.

  Same-sign branches never cross, so branch k >= 0 is the (k+1)-th positive
  eigenvalue and branch k < 0 the |k|-th negative one counted from zero.

  Raises:
    TruncationError: If the count nearest eigenvalues miss the branch
  """
  pairs = solve_fiber_grid(p, g, count)
  if k >= 0:
    side = [e for e in pairs if e.lam > 0]
    position = k
  else:
    side = sorted((e for e in pairs if e.lam < 0), key=lambda e: -e.lam)
    position = -k - 1
  if position >= len(side):
    raise TruncationError(
        f'Branch {k} is not among the {count} eigenvalues nearest 0 at '
        f'xi={p.xi}')
  return side[position]


def hf_velocity(e: EdgeEigenpair) -> float:
  """
  Hellmann-Feynman velocity d lambda / d xi = <psi, sigma1 psi>.

  On the staggered grid this is sum_j h psi2_j+1/2 (psi1_j + psi1_j+1), the
  exact derivative of the discrete eigenvalue. When the next coarser value is
  attached it is Richardson-combined the same way as the eigenvalue.
  """
  h = float(e.x[1] - e.x[0])
  fine = _discrete_velocity(e.psi1, e.psi2, h)
  if e.velocity_coarse is None:
    return fine
  return (4.0 * fine - e.velocity_coarse) / 3.0


def secular_function(p: FiberProblem, lam: float) -> float:
  """
  Boundary mismatch F(lambda) whose zeros are the eigenvalues.

  F(lambda) = U(a, z0) - lambda / sqrt(2b) U(a+1, z0) with
  a = -(lambda^2 + b) / 2b and z0 = xi sqrt(2/b).

  With psi1(x) = U(a, sqrt(2/b)(b x + xi)) the second component follows from
  the recurrence U' + (z/2) U = -(a + 1/2) U(a+1, z), and F is the boundary
  condition psi1(0) - psi2(0) up to a positive factor.

  Args:
    p: Fiber problem
    lam: Nonzero trial eigenvalue

  Returns:
    F(lambda)

  Raises:
    DomainError: If lambda is 0
    RangeError: If the orders or argument leave the U working range
  """
  if lam == 0 or not math.isfinite(lam):
    raise DomainError(
        f'secular_function needs a finite nonzero lambda, got {lam}')
  a = -(lam * lam + p.b) / (2.0 * p.b)
  z0 = p.xi * math.sqrt(2.0 / p.b)
  if abs(a) > U_MAX_ORDER or abs(z0) > U_MAX_ARGUMENT:
    raise RangeError(f'lambda={lam}, xi={p.xi} leave the U working range '
                     f'(a={a:.3g}, z0={z0:.3g})')
  values, _, _ = integrate_u(np.array([a, a + 1.0]), z0)
  return float(values[0] - lam / math.sqrt(2.0 * p.b) * values[1])


def _scan_roots(p: FiberProblem, lo: float, hi: float) -> list[float]:
  steps = max(1, math.ceil((hi - lo) / SECULAR_SCAN_STEP))
  grid = np.linspace(lo, hi, steps + 1)
  values = [secular_function(p, float(t)) for t in grid]
  roots = []
  for t0, t1, f0, f1 in zip(grid, grid[1:], values, values[1:]):
    if f0 == 0.0:
      roots.append(float(t0))
    elif f0 * f1 < 0:
      roots.append(
          float(
              brentq(lambda t: secular_function(p, t),
                     t0,
                     t1,
                     xtol=SECULAR_XTOL)))
  if values[-1] == 0.0:
    roots.append(float(grid[-1]))
  return roots


def solve_fiber_secular(
    p: FiberProblem,
    window: tuple[float, float],
    check_grid: Optional[GridSpec] = None,
) -> list[float]:
  """
  Roots of the secular function inside a window not straddling 0.

  The window is sign-scanned at SECULAR_SCAN_STEP and every bracket polished
  with Brent's method. |lambda| < SECULAR_EXCLUSION is excluded.

  Args:
    p: Fiber problem
    window: (lo, hi) with lo < hi and 0 not inside
    check_grid: If given, the root count is compared with the grid backend

  Returns:
    Sorted roots

  Raises:
    PreconditionError: If the window is empty or contains 0 in its interior
    ConsistencyError: If the grid backend finds a different count
  """
  lo, hi = window
  if not lo < hi:
    raise PreconditionError(f'Empty window ({lo}, {hi})')
  if lo < 0 < hi:
    raise PreconditionError(
        f'Window ({lo}, {hi}) contains 0; split it at 0 for the secular '
        'backend')
  if lo >= 0:
    lo = max(lo, SECULAR_EXCLUSION)
  else:
    hi = min(hi, -SECULAR_EXCLUSION)
  roots = sorted(_scan_roots(p, lo, hi)) if lo < hi else []

  if check_grid is not None:
    d, e = fiber_matrix(p, check_grid)
    expected = _eigenvalues(d, e, lo, hi).size
    if expected != len(roots):
      raise ConsistencyError(
          f'Secular scan found {len(roots)} roots in ({lo}, {hi}) at '
          f'xi={p.xi}; the grid backend finds {expected}',
          estimate=abs(expected - len(roots)),
          diagnostics={
              'roots': roots,
              'grid_count': expected
          })
  return roots


def asymptotic_label(b: float, lam: float) -> int:
  """Nearest bulk level index sgn(lambda) round(lambda^2 / 2b)."""
  return int(math.copysign(round(lam * lam / (2.0 * b)), lam))


def _xi_samples(xi_range: tuple[float, float, float]) -> np.ndarray:
  start, stop, step = xi_range
  if not (step > 0 and stop > start):
    raise PreconditionError(
        f'xi_range needs start < stop and step > 0, got {xi_range}')
  count = int(math.floor((stop - start) / step + 1e-9)) + 1
  return start + step * np.arange(count)


def _trace_bound(b: float, k_max: int, xi: float) -> float:
  """Eigenvalue window containing branches |k| <= k_max at xi."""
  return (math.sqrt(2.0 * (k_max + 2) * b) + math.sqrt(b) +
          2.0 * max(xi, 0.0))


def _sample_grid(b: float, xi: float, k_max: int, grid_n: int) -> GridSpec:
  p = FiberProblem(b, xi)
  return GridSpec.for_problem(p, _trace_bound(b, k_max, xi), n=grid_n)


def match_eigenvalue(
    spectrum: np.ndarray,
    prediction: float,
    k: int,
    xi: float,
) -> int:
  """
  Index of the eigenvalue continuing branch k, within MATCH_FRACTION of the
  local spacing of the prediction.

  Raises:
    ContinuationError: If no eigenvalue is close enough
  """
  if spectrum.size == 0:
    raise ContinuationError(f'No eigenvalues at xi={xi} for branch {k}')
  distance = np.abs(spectrum - prediction)
  j = int(np.argmin(distance))
  neighbors = [
      abs(spectrum[j] - spectrum[i])
      for i in (j - 1, j + 1)
      if 0 <= i < spectrum.size
  ]
  spacing = min(neighbors) if neighbors else math.inf
  if distance[j] > MATCH_FRACTION * spacing:
    raise ContinuationError(
        f'Branch {k} lost its eigenvalue at xi={xi}: nearest '
        f'{spectrum[j]:.6f} is {distance[j]:.3g} from the prediction '
        f'{prediction:.6f} (tolerance {MATCH_FRACTION * spacing:.3g})',
        estimate=float(distance[j]),
        diagnostics={
            'k': k,
            'xi': xi,
            'prediction': prediction
        })
  return j


def label_left_end(
    b: float,
    spectrum: np.ndarray,
    k_set: Sequence[int],
    xi: float,
) -> dict[int, int]:
  """Spectrum index of each label at the left end of a sweep."""
  labels = [asymptotic_label(b, float(lam)) for lam in spectrum]
  assigned = {}
  for k in k_set:
    hits = [i for i, label in enumerate(labels) if label == k]
    if len(hits) != 1:
      raise LabelingError(
          f'{len(hits)} eigenvalues carry label {k} at xi={xi}; the sweep '
          'does not start in the asymptotic regime',
          diagnostics={
              'k': k,
              'xi': xi,
              'candidates': [float(spectrum[i]) for i in hits]
          })
    assigned[k] = hits[0]
  return assigned


def check_increasing(branch: DispersionBranch,
                     slack: float = MONOTONE_SLACK) -> None:
  """
  Require a k >= 0 branch to increase strictly with positive velocity.

  Samples within slack of the asymptote form the far-left plateau, where
  lambda_k - sqrt(2kb) is below the eigenvalue accuracy. Between two plateau
  samples a step down of at most slack is accepted, and a plateau velocity
  may be as low as -slack.

  Raises:
    ConvergenceError: Naming the first xi where the branch fails to increase
  """
  lam, velocity, xi = branch.lam, branch.velocity, branch.xi
  plateau = np.abs(lam - branch.asymptote) <= slack
  steps = np.diff(lam)
  step_ok = np.where(plateau[:-1] & plateau[1:], steps >= -slack, steps > 0)
  velocity_ok = np.where(plateau, velocity >= -slack, velocity > 0)
  bad_steps = np.flatnonzero(~step_ok)
  bad_velocities = np.flatnonzero(~velocity_ok)
  if bad_steps.size == 0 and bad_velocities.size == 0:
    return
  if bad_steps.size:
    i = int(bad_steps[0])
    where, estimate = float(xi[i + 1]), float(-steps[i])
    what = f'lambda drops by {estimate:.3e}'
  else:
    i = int(bad_velocities[0])
    where, estimate = float(xi[i]), float(-velocity[i])
    what = f'velocity {velocity[i]:.3e}'
  raise ConvergenceError(
      f'Branch {branch.k} is not increasing at xi={where}: {what}',
      estimate=estimate,
      diagnostics={
          'k': branch.k,
          'xi': where,
          'bad_steps': bad_steps.size,
          'bad_velocities': bad_velocities.size,
      })


def trace_branches(
    b: float,
    xi_range: tuple[float, float, float],
    k_set: Sequence[int],
    jobs: int = 1,
    grid_n: int = DEFAULT_GRID_N,
    backend: str = 'grid',
) -> list[DispersionBranch]:
  """
  Trace dispersion branches lambda_k(xi) with their velocities.

  Base-grid spectra are computed for all xi in parallel, then assigned to
  branches sequentially: each branch takes the eigenvalue nearest to the
  linear extrapolation of its last two samples, within MATCH_FRACTION of the
  local level spacing. The matched eigenvalues are finally refined to
  Richardson-extrapolated eigenpairs, again in parallel.

  Args:
    b: Magnetic field strength
    xi_range: (start, stop, step) of the sweep
    k_set: Branch labels to trace
    jobs: Worker threads
    grid_n: Base grid cell count
    backend: Only 'grid' supplies eigenpairs

  Returns:
    Branches sorted by label

  Raises:
    LabelingError: If labels are ambiguous at the left end or two branches
      claim the same eigenvalue
    ContinuationError: If a branch loses its eigenvalue between samples
    ConvergenceError: If a k >= 0 branch fails to increase
  """
  if backend != 'grid':
    raise PreconditionError(
        f"Tracing needs eigenpairs; backend '{backend}' supplies eigenvalues "
        "only. Available: ['grid']")
  if not b > 0:
    raise DomainError(f'b must be positive, got {b}')
  labels = sorted(set(int(k) for k in k_set))
  if not labels:
    raise PreconditionError('k_set must not be empty')
  k_max = max(abs(k) for k in labels)
  xs = _xi_samples(xi_range)
  required = -6.0 * math.sqrt(b * max(k_max, 1)) - 4.0
  if xs[0] > required:
    logger.warning(
        'xi sweep starts at %.3f, right of the asymptotic regime %.3f; '
        'labels rely on the left-end eigenvalues only', xs[0], required)

  grids = [_sample_grid(b, float(xi), k_max, grid_n) for xi in xs]

  def base(i: int) -> np.ndarray:
    xi = float(xs[i])
    return _base_spectrum(FiberProblem(b, xi), grids[i],
                          _trace_bound(b, k_max, xi))

  logger.info('Tracing branches %s at b=%g over %d xi samples', labels, b,
              xs.size)
  spectra = ordered_map(base, list(range(xs.size)), jobs)

  index = label_left_end(b, spectra[0], labels, float(xs[0]))
  tracks: dict[int, list[int]] = {k: [index[k]] for k in labels}
  for i in range(1, xs.size):
    claimed: dict[int, int] = {}
    for k in labels:
      history = [float(spectra[i - 1 - m][tracks[k][-1 - m]])
                 for m in range(min(2, i))]
      if len(history) == 2:
        prediction = 2.0 * history[0] - history[1]
      else:
        prediction = history[0]
      j = match_eigenvalue(spectra[i], prediction, k, float(xs[i]))
      if j in claimed:
        raise LabelingError(
            f'Branches {claimed[j]} and {k} claim the same eigenvalue '
            f'{spectra[i][j]:.6f} at xi={xs[i]}',
            diagnostics={
                'xi': float(xs[i]),
                'branches': [claimed[j], k]
            })
      claimed[j] = k
      tracks[k].append(j)

  def refine(i: int) -> list[EdgeEigenpair]:
    p = FiberProblem(b, float(xs[i]))
    return _refine(p, grids[i], spectra[i], [tracks[k][i] for k in labels])

  refined = ordered_map(refine, list(range(xs.size)), jobs)

  branches = []
  for col, k in enumerate(labels):
    samples = [
        BranchSample(float(xs[i]), refined[i][col].lam,
                     hf_velocity(refined[i][col]),
                     refined[i][col].bc_residual,
                     refined[i][col].ode_residual) for i in range(xs.size)
    ]
    branch = DispersionBranch(k=k, b=b, samples=samples)
    if k >= 0:
      check_increasing(branch)
    branches.append(branch)
  min_spacing = min(
      float(np.min(np.diff(s))) if s.size > 1 else math.inf for s in spectra)
  logger.info('Traced %d branches; minimum level spacing %.3g', len(branches),
              min_spacing)
  return branches


def dispersion_table(branches: Sequence[DispersionBranch]) -> pd.DataFrame:
  """Branch samples as rows xi, k, lambda, velocity and the two residuals."""
  rows = [(s.xi, br.k, s.lam, s.velocity, s.bc_residual, s.ode_residual)
          for br in branches
          for s in br.samples]
  return pd.DataFrame(rows,
                      columns=[
                          'xi', 'k', 'lambda', 'velocity', 'bc_residual',
                          'ode_residual'
                      ])


def _top_negative(b: float, xi: float, grid_n: int) -> float:
  p = FiberProblem(b, xi)
  grid = _sample_grid(b, xi, 1, grid_n)
  spectrum = _base_spectrum(p, grid, _trace_bound(b, 1, xi))
  negative = np.flatnonzero(spectrum < 0)
  if negative.size == 0:
    raise ContinuationError(f'No negative eigenvalue at xi={xi}')
  return _refine(p, grid, spectrum, [int(negative[-1])])[0].lam


def locate_edge_gap(
    b: float,
    jobs: int = 1,
    grid_n: int = DEFAULT_GRID_N,
) -> ComputeOutput[tuple[float, float]]:
  """
  Spectral gap (lambda_bar, 0) of the half-plane operator below zero.

  Branches k = -3..-1 are traced over xi in [-(6 sqrt 3 + 4) sqrt b, 4 sqrt b]
  with step 0.05 sqrt b; the maximum of lambda_-1 is then refined by bounded
  scalar maximization around the best sample. The sweep scales with sqrt(b),
  so lambda_bar scales exactly as sqrt(b).

  Returns:
    ComputeOutput with value (lambda_bar, 0.0) and diag xi_at_max

  Raises:
    ConsistencyError: If lambda_bar is not negative
  """
  root_b = math.sqrt(b)
  xi_range = (-(6.0 * math.sqrt(3.0) + 4.0) * root_b, 4.0 * root_b,
              0.05 * root_b)
  branches = trace_branches(b, xi_range, (-3, -2, -1), jobs=jobs, grid_n=grid_n)
  top = next(br for br in branches if br.k == -1)
  best = int(np.argmax(top.lam))
  xi_best = float(top.xi[best])
  lambda_bar = float(top.lam[best])

  step = xi_range[2]
  result = minimize_scalar(lambda xi: -_top_negative(b, float(xi), grid_n),
                           bounds=(xi_best - step, xi_best + step),
                           method='bounded',
                           options={'xatol': 1e-6 * root_b})
  if -result.fun > lambda_bar:
    lambda_bar = float(-result.fun)
    xi_best = float(result.x)

  if not lambda_bar < 0:
    raise ConsistencyError(
        f'Negative branches reach lambda={lambda_bar} >= 0 at xi={xi_best}; '
        'the edge gap below zero is closed',
        estimate=lambda_bar)
  logger.info('Edge gap at b=%g: (%.8f, 0), maximum at xi=%.6f', b,
              lambda_bar, xi_best)
  return ComputeOutput(value=(lambda_bar, 0.0),
                       diag={
                           'xi_at_max': xi_best,
                           'branch_max_sample': float(top.lam[best]),
                           'samples': int(top.xi.size),
                       })


def edge_gap_estimate(
    b: float,
    jobs: int = 1,
    grid_n: int = DEFAULT_GRID_N,
) -> tuple[float, float]:
  """Interval (lambda_bar, 0) free of edge spectrum below zero."""
  return locate_edge_gap(b, jobs=jobs, grid_n=grid_n).value


class FiberBackend(ABC):
  """Eigenvalue solver for a fiber problem inside a window."""

  @property
  @abstractmethod
  def name(self) -> str:
    """Backend name used in registries and outputs."""

  @abstractmethod
  def eigenvalues(
      self,
      problem: FiberProblem,
      window: tuple[float, float],
  ) -> ComputeOutput[list[float]]:
    """
    Eigenvalues of h(xi) inside window, sorted.

    Args:
      problem: Fiber problem
      window: (lo, hi)

    Returns:
      ComputeOutput with the eigenvalues and backend diagnostics
    """


class GridBackend(FiberBackend):
  """Staggered-grid backend with Richardson extrapolation."""

  def __init__(self, grid_n: int = DEFAULT_GRID_N):
    self.grid_n = grid_n

  @property
  def name(self) -> str:
    return 'grid'

  def eigenvalues(
      self,
      problem: FiberProblem,
      window: tuple[float, float],
  ) -> ComputeOutput[list[float]]:
    lo, hi = window
    if not lo < hi:
      raise PreconditionError(f'Empty window ({lo}, {hi})')
    bound = max(abs(lo), abs(hi))
    grid = GridSpec.for_problem(problem, bound, n=self.grid_n)
    # Solve on a wider window so every eigenvalue inside has neighbours.
    spectrum = _base_spectrum(problem, grid, bound + math.sqrt(problem.b))
    inside = [i for i, lam in enumerate(spectrum) if lo < lam < hi]
    pairs = _refine(problem, grid, spectrum, inside)
    values = sorted(e.lam for e in pairs if lo < e.lam < hi)
    return ComputeOutput(value=values,
                         diag={
                             'x_max': grid.x_max,
                             'grid_n': self.grid_n,
                             'max_richardson_disagreement': max(
                                 (e.diag['richardson_disagreement']
                                  for e in pairs),
                                 default=0.0),
                         })


class SecularBackend(FiberBackend):
  """Parabolic-cylinder secular equation; windows straddling 0 are split."""

  @property
  def name(self) -> str:
    return 'secular'

  def eigenvalues(
      self,
      problem: FiberProblem,
      window: tuple[float, float],
  ) -> ComputeOutput[list[float]]:
    lo, hi = window
    if not lo < hi:
      raise PreconditionError(f'Empty window ({lo}, {hi})')
    if lo < 0 < hi:
      values = (solve_fiber_secular(problem, (lo, 0.0)) +
                solve_fiber_secular(problem, (0.0, hi)))
    else:
      values = solve_fiber_secular(problem, (lo, hi))
    return ComputeOutput(value=sorted(values),
                         diag={
                             'excluded_radius': SECULAR_EXCLUSION,
                             'scan_step': SECULAR_SCAN_STEP,
                         })


def fiber_eigenvalues(
    backend: FiberBackend,
    problem: FiberProblem,
    window: tuple[float, float],
) -> ComputeOutput[list[float]]:
  """Run a backend and attach its name to the diagnostics."""
  try:
    out = backend.eigenvalues(problem, window)
  except AccuracyError:
    logger.error('Backend %s failed at xi=%g', backend.name, problem.xi)
    raise
  out.diag['backend'] = backend.name
  return out
