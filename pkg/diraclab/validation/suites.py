"""
Verification suites over the numerical engine.

Each suite registers its acceptance invariants with add_check and its
informational outputs (calibrated constants) with add_warning. Tolerances and
worker counts come from the RunConfig; the fixed sample sets and seeds make
every run reproducible.
"""
from collections.abc import Callable
import functools
import math

import numpy as np
from scipy.integrate import quad

from diraclab.domain.types import FiberProblem
from diraclab.domain.types import GridSpec
from diraclab.domain.types import PlanePoint
from diraclab.domain.types import SpectralIsland
from diraclab.domain.types import SpectralParameter
from diraclab.engine.correspondence import bulk_edge_report
from diraclab.engine.correspondence import chern_zero_mode
from diraclab.engine.correspondence import spectral_flow
from diraclab.engine.correspondence import streda_slope
from diraclab.engine.correspondence import trace_report_branches
from diraclab.engine.edge_fiber import eigenpair_on_branch
from diraclab.engine.edge_fiber import fiber_matrix
from diraclab.engine.edge_fiber import GridBackend
from diraclab.engine.edge_fiber import hf_velocity
from diraclab.engine.edge_fiber import locate_edge_gap
from diraclab.engine.edge_fiber import solve_fiber_grid
from diraclab.engine.edge_fiber import solve_fiber_secular
from diraclab.engine.funcalc import almost_analytic_extension
from diraclab.engine.funcalc import eigen_matrix_function
from diraclab.engine.funcalc import hs_functional_calculus
from diraclab.engine.funcalc import hs_matrix_function
from diraclab.engine.funcalc import make_gap_function
from diraclab.engine.kernels import dirac_residual
from diraclab.engine.kernels import edge_kernel_b0
from diraclab.engine.kernels import gauge_covariance_residual
from diraclab.engine.kernels import schur_norm
from diraclab.engine.specfun import DECAY_CONSTANT
from diraclab.engine.specfun import DERIVATIVE_DECAY_CONSTANT
from diraclab.engine.specfun import integrate_u
from diraclab.engine.specfun import macdonald_k0
from diraclab.engine.specfun import macdonald_k0_prime
from diraclab.engine.specfun import macdonald_k0_values
from diraclab.engine.specfun import parabolic_cylinder_u
from diraclab.functions.gaussian import GaussianFunction
from diraclab.scenarios.config import RunConfig
from diraclab.shared.parallel import resolve_jobs
from diraclab.validation.base import CheckResult
from diraclab.validation.base import fail_result
from diraclab.validation.base import pass_result
from diraclab.validation.base import tolerance_result
from diraclab.validation.base import worst
from diraclab.validation.runner import ValidationRunner

SPECFUN_TOL = 1e-10
GAUSSIAN_U_TOL = 1e-12
U_ODE_TOL = 1e-8
U_RECURRENCE_TOL = 1e-8
# Orders and arguments of the random U samples.
U_SAMPLE_RANGE = 5.0
DIRAC_RESIDUAL_TOL = 1e-6
BOUNDARY_DEFECT_TOL = 1e-12
SCHUR_RATIO_TOL = 0.1
SCHUR_LINEARITY_TOL = 1e-6
ASYMPTOTE_TOL = 1e-3
HF_TOL = 1e-5
HS_EIGEN_TOL = 1e-4
HS_ORDER_TOL = 1e-5
EDGE_GAP_SCALING_TOL = 1e-6
STREDA_RESIDUAL_TOL = 1e-12
CHERN_STREDA_TOL = 2e-3

_SEED = 20240501


# --- specfun -----------------------------------------------------------------


def _cosh_integral(t: float, power: int) -> float:
  value, _ = quad(lambda s: math.cosh(s)**power * math.exp(-t * math.cosh(s)),
                  0.0,
                  np.inf,
                  epsabs=1e-15,
                  epsrel=1e-14,
                  limit=200)
  return value


def check_k0_oracle() -> list[CheckResult]:
  """K0(1) and K0'(1) against the cosh integral representation."""
  return [
      tolerance_result('k0_at_one',
                       abs(macdonald_k0(1.0).value - _cosh_integral(1.0, 0)),
                       SPECFUN_TOL),
      tolerance_result(
          'k0_prime_at_one',
          abs(macdonald_k0_prime(1.0).value + _cosh_integral(1.0, 1)),
          SPECFUN_TOL),
  ]


def check_gaussian_u() -> CheckResult:
  """U(-1/2, z) = exp(-z^2/4) on 100 samples of [-10, 10]."""
  error = max(
      abs(parabolic_cylinder_u(-0.5, float(z)).value - math.exp(-z * z / 4))
      for z in np.linspace(-10.0, 10.0, 100))
  return tolerance_result('u_gaussian_closed_form', error, GAUSSIAN_U_TOL)


def report_decay_constants() -> CheckResult:
  return pass_result(
      'macdonald_decay_constants',
      f'C = {DECAY_CONSTANT:.12g}, C1 = {DERIVATIVE_DECAY_CONSTANT:.12g}')


def _u_samples(count: int, seed: int) -> np.ndarray:
  rng = np.random.default_rng(seed)
  return rng.uniform(-U_SAMPLE_RANGE, U_SAMPLE_RANGE, size=(count, 2))


def u_ode_residual(a: float, z: float, h: float = 1e-3) -> float:
  """
  Scaled ODE residual |U'' - (z^2/4 + a) U| / (1 + |U|) at one point.

  U'' is the fourth-order central difference of the returned U'.
  """
  stencil = np.array([z - 2 * h, z - h, z + h, z + 2 * h])
  derivs = [integrate_u(np.array([a]), float(t))[1][0] for t in stencil]
  second = (derivs[0] - 8 * derivs[1] + 8 * derivs[2] - derivs[3]) / (12 * h)
  value = integrate_u(np.array([a]), z)[0][0]
  return abs(second - (0.25 * z * z + a) * value) / (1.0 + abs(value))


def check_u_ode(samples: int = 1000) -> CheckResult:
  """U solves its ODE at random (a, z) in the sampled range."""
  error = max(
      u_ode_residual(float(a), float(z))
      for a, z in _u_samples(samples, _SEED + 10))
  return tolerance_result('u_ode_residual', error, U_ODE_TOL,
                          f'max residual over {samples} samples')


def check_u_recurrence(samples: int = 100) -> CheckResult:
  """U'(a,z) + (z/2) U(a,z) + (a+1/2) U(a+1,z) = 0, relative to its terms."""
  error = 0.0
  for a, z in _u_samples(samples, _SEED + 11):
    values, derivs, _ = integrate_u(np.array([a, a + 1.0]), float(z))
    terms = [derivs[0], 0.5 * z * values[0], (a + 0.5) * values[1]]
    scale = sum(abs(t) for t in terms)
    if scale > 0:
      error = max(error, abs(sum(terms)) / scale)
  return tolerance_result('u_recurrence', error, U_RECURRENCE_TOL,
                          'max relative defect')


def check_k0_decreasing(samples: int = 1000) -> CheckResult:
  """K0 is strictly decreasing on a geometric grid of t."""
  t = np.geomspace(1e-4, 40.0, samples)
  steps = np.diff(macdonald_k0_values(t))
  rises = int(np.count_nonzero(steps >= 0))
  if rises:
    where = float(t[1:][steps >= 0][0])
    return fail_result('k0_decreasing',
                       f'{rises} non-decreasing steps, first at t={where:g}')
  return pass_result('k0_decreasing', f'{samples} samples in [1e-4, 40]')


# --- kernels -----------------------------------------------------------------


def check_dirac_residual(sqrt_lambda: float) -> CheckResult:
  """Free-kernel Dirac residual at 20 off-diagonal pairs."""
  rng = np.random.default_rng(_SEED)
  s = SpectralParameter(sqrt_lambda)
  residuals = []
  for _ in range(20):
    x = PlanePoint(*rng.uniform(-2.0, 2.0, 2))
    offset = rng.normal(size=2)
    offset *= rng.uniform(0.3, 2.0) / np.linalg.norm(offset)
    xp = PlanePoint(x.x1 + offset[0], x.x2 + offset[1])
    residuals.append(dirac_residual('free', x, xp, s, h=1e-4))
  return tolerance_result(f'dirac_residual_s{sqrt_lambda:g}', max(residuals),
                          DIRAC_RESIDUAL_TOL, 'max residual')


def check_boundary_rows(sqrt_lambda: float) -> CheckResult:
  """Edge kernel rows agree at x2 = 0 for 100 random interior sources."""
  rng = np.random.default_rng(_SEED + 1)
  s = SpectralParameter(sqrt_lambda)
  defect = 0.0
  for _ in range(100):
    xp = PlanePoint(float(rng.uniform(-3, 3)), float(rng.uniform(0.05, 3)))
    x = PlanePoint(float(rng.uniform(-3, 3)), 0.0)
    k = edge_kernel_b0(x, xp, s)
    row_gap = float(np.max(np.abs(k.entries[0] - k.entries[1])))
    defect = max(defect, row_gap / max(1.0, k.norm()))
  return tolerance_result('boundary_row_equality', defect, BOUNDARY_DEFECT_TOL,
                          'max defect')


def check_schur_scaling() -> list[CheckResult]:
  """T-kernel Schur value: 1/lambda decay and exact linearity in b."""
  t_100 = schur_norm('T', 1.0, SpectralParameter(10.0))
  t_400 = schur_norm('T', 1.0, SpectralParameter(20.0))
  t_half = schur_norm('T', 0.5, SpectralParameter(10.0))
  return [
      tolerance_result('schur_t_lambda_ratio',
                       abs(t_400 / t_100 / 0.25 - 1.0), SCHUR_RATIO_TOL,
                       'relative deviation'),
      tolerance_result('schur_t_linear_in_b', abs(t_100 / t_half - 2.0),
                       SCHUR_LINEARITY_TOL),
  ]


def check_gauge_covariance() -> CheckResult:
  residual = max(
      gauge_covariance_residual(b, PlanePoint(0.4, -0.3), PlanePoint(1.1, 0.6))
      for b in (0.5, 1.0, 3.0))
  return tolerance_result('gauge_covariance', residual, DIRAC_RESIDUAL_TOL,
                          'max residual')


# --- fiber -------------------------------------------------------------------


def check_asymptotes(grid_n: int) -> CheckResult:
  """Levels 0, 1, 2 at b = 1, xi = -8 sit at sqrt(2k)."""
  p = FiberProblem(1.0, -8.0)
  pairs = solve_fiber_grid(p, GridSpec.for_problem(p, 4.0, n=grid_n), count=6)
  upper = sorted(e.lam for e in pairs if e.lam > -0.5)[:3]
  expected = [math.sqrt(2.0 * k) for k in range(3)]
  error = max(abs(a - e) for a, e in zip(upper, expected))
  return tolerance_result('edge_asymptotes', error, ASYMPTOTE_TOL)


def check_backends(xi: float, tol: float, grid_n: int) -> CheckResult:
  """Grid and secular backends agree on the 4 smallest-|lambda| levels."""
  p = FiberProblem(1.0, xi)
  pairs = solve_fiber_grid(p, GridSpec.for_problem(p, 4.0, n=grid_n), count=4)
  grid_values = sorted(e.lam for e in pairs)
  edge = max(abs(v) for v in grid_values) + 0.1
  roots = (solve_fiber_secular(p, (-edge, 0.0)) +
           solve_fiber_secular(p, (0.0, edge)))
  secular_values = sorted(sorted(roots, key=abs)[:4])
  if len(secular_values) != len(grid_values):
    return CheckResult(
        f'backends_xi{xi:g}', False,
        f'grid found {grid_values}, secular found {secular_values}')
  error = max(abs(a - b) for a, b in zip(grid_values, secular_values))
  return tolerance_result(f'backends_xi{xi:g}', error, tol)


HF_FIELDS = (0.5, 1.0, 2.0)
HF_MOMENTA = (-2.0, 0.0, 2.0)
HF_BRANCHES = (0, 1, -1)


def hf_combinations() -> list[tuple[float, float, int]]:
  """Nine (b, xi, k); each field meets every momentum and every branch."""
  return [(b, xi, HF_BRANCHES[(i + j) % 3])
          for i, b in enumerate(HF_FIELDS)
          for j, xi in enumerate(HF_MOMENTA)]


def check_hellmann_feynman(grid_n: int) -> CheckResult:
  """HF velocity vs central difference at 9 (b, xi, k) combinations."""
  step = 1e-3
  results = []
  for b, xi, k in hf_combinations():
    p = FiberProblem(b, xi)
    grid = GridSpec.for_problem(p, 4.5 * math.sqrt(b), n=grid_n)
    slope = (eigenpair_on_branch(FiberProblem(b, xi + step), grid, k).lam -
             eigenpair_on_branch(FiberProblem(b, xi - step), grid, k).lam) / (
                 2 * step)
    velocity = hf_velocity(eigenpair_on_branch(p, grid, k))
    results.append(
        tolerance_result(f'hf_b{b:g}_xi{xi:g}_k{k}', abs(velocity - slope),
                         HF_TOL))
  return worst('hellmann_feynman', results)


def check_hs_fiber(jobs: int) -> list[CheckResult]:
  """Functional calculus of the n=64 fiber matrix and N-independence."""
  diag, off = fiber_matrix(FiberProblem(1.0, 0.0), GridSpec(x_max=8.0, n=64))
  A = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
  f = make_gap_function(SpectralIsland((0,)), 1.0)
  hs = hs_functional_calculus(A, f, jobs=jobs).value
  gaussian = GaussianFunction()
  small = np.array([[0.3, 0.5], [0.5, -0.8]])
  return [
      tolerance_result('hs_vs_eigen',
                       float(np.max(np.abs(hs - eigen_matrix_function(A, f)))),
                       HS_EIGEN_TOL),
      tolerance_result(
          'hs_order_independence',
          float(
              np.max(
                  np.abs(
                      hs_matrix_function(small, gaussian, N=3) -
                      hs_matrix_function(small, gaussian, N=5)))),
          HS_ORDER_TOL),
  ]


@functools.lru_cache(maxsize=None)
def _edge_gap_bottom(b: float, jobs: int, grid_n: int) -> float:
  return locate_edge_gap(b, jobs=jobs, grid_n=grid_n).value[0]


def check_edge_gap(jobs: int, grid_n: int) -> list[CheckResult]:
  """Edge gap below zero: location, emptiness and sqrt(b) scaling."""
  lambda_bar = _edge_gap_bottom(1.0, jobs, grid_n)
  lambda_bar_4 = _edge_gap_bottom(4.0, jobs, grid_n)
  backend = GridBackend(grid_n)
  found = []
  for xi in np.linspace(-6.0, 4.0, 21):
    found.extend(
        backend.eigenvalues(FiberProblem(1.0, float(xi)),
                            (lambda_bar + 1e-6, -1e-6)).value)
  inside = -math.sqrt(2.0) < lambda_bar < 0
  return [
      CheckResult('edge_gap_location', inside,
                  f'lambda_bar = {lambda_bar:.8f} in (-sqrt 2, 0)'),
      CheckResult('edge_gap_empty', not found,
                  f'{len(found)} eigenvalues inside the gap'),
      tolerance_result('edge_gap_sqrt_b_scaling',
                       abs(lambda_bar_4 / lambda_bar - 2.0),
                       EDGE_GAP_SCALING_TOL),
  ]


def report_extension_constant() -> CheckResult:
  ext = almost_analytic_extension(GaussianFunction(), 3)
  return pass_result('almost_analytic_constant',
                     f'C_3 = {ext.decay_constant:.6g} for the Gaussian')


# --- correspondence ----------------------------------------------------------


def check_streda(tol: float) -> list[CheckResult]:
  """IDS slope over b in [0.8, 1.2] equals N / 2 pi for N = 1, 2, 3."""
  results = []
  for n in (1, 2, 3):
    out = streda_slope(SpectralIsland.from_range(0, n - 1),
                       np.linspace(0.8, 1.2, 5))
    results.append(
        tolerance_result(f'streda_residual_n{n}', out.diag['residual'],
                         STREDA_RESIDUAL_TOL))
    results.append(
        tolerance_result(f'streda_chern_n{n}', abs(out.value[1] - n), tol))
  return results


def check_bulk_edge(config: RunConfig, levels: tuple[int, ...],
                    jobs: int) -> list[CheckResult]:
  """Bulk vs edge current, bulk formula and spectral flow for an island."""
  island = SpectralIsland(levels)
  f = make_gap_function(island, 1.0, config.margin)
  branches = trace_report_branches(island, f, 1.0, jobs=jobs,
                                   grid_n=config.grid_n)
  report = bulk_edge_report(island,
                            1.0,
                            margin=config.margin,
                            branches=branches,
                            jobs=jobs,
                            tol_bulk_edge=config.tol_bulk_edge,
                            tol_streda=config.tol_streda)
  tag = ''.join(str(k) for k in levels)
  expected = island.N / (2.0 * math.pi)
  results = [
      tolerance_result(f'bulk_edge_island{tag}', report.rel_err,
                       config.tol_bulk_edge, 'relative error'),
      tolerance_result(f'bulk_formula_island{tag}',
                       abs(report.bulk_value - expected) / expected,
                       config.tol_bulk_edge, 'relative error'),
      CheckResult(f'spectral_flow_island{tag}', report.spectral_flow
                  == island.N,
                  f'flow {report.spectral_flow}, expected {island.N}'),
  ]
  if levels[0] == 0:
    lambda_bar = _edge_gap_bottom(1.0, jobs, config.grid_n)
    flow = spectral_flow(0.5 * lambda_bar, branches)
    results.append(
        CheckResult(f'negative_gap_flow_island{tag}', flow == 0,
                    f'flow {flow} at mu = {0.5 * lambda_bar:.6f}'))
  return results


def check_chern(config: RunConfig, jobs: int) -> list[CheckResult]:
  """Zero-mode Chern character is 1 and matches the Streda estimate."""
  chern = chern_zero_mode(1.0, quad_radius=config.quad_radius, jobs=jobs).value
  streda = streda_slope(SpectralIsland((0,)), (0.95, 1.0, 1.05)).value[1]
  return [
      tolerance_result('chern_zero_mode', abs(chern - 1.0), config.tol_chern),
      tolerance_result('chern_vs_streda', abs(chern - streda),
                       CHERN_STREDA_TOL),
  ]


# --- assembly ----------------------------------------------------------------


def specfun_suite(config: RunConfig) -> ValidationRunner:
  del config
  runner = ValidationRunner('specfun')
  runner.add_check('k0_oracle', check_k0_oracle)
  runner.add_check('u_gaussian_closed_form', check_gaussian_u)
  runner.add_check('u_ode_residual', check_u_ode)
  runner.add_check('u_recurrence', check_u_recurrence)
  runner.add_check('k0_decreasing', check_k0_decreasing)
  runner.add_warning('macdonald_decay_constants', report_decay_constants)
  return runner


def kernels_suite(config: RunConfig) -> ValidationRunner:
  del config
  runner = ValidationRunner('kernels')
  for sq in (1.0, 2.0):
    runner.add_check(f'dirac_residual_s{sq:g}', check_dirac_residual, sq)
  runner.add_check('boundary_row_equality', check_boundary_rows, 1.5)
  runner.add_check('schur_scaling', check_schur_scaling)
  runner.add_check('gauge_covariance', check_gauge_covariance)
  return runner


def fiber_suite(config: RunConfig) -> ValidationRunner:
  jobs = resolve_jobs(config.jobs)
  runner = ValidationRunner('fiber')
  runner.add_check('edge_asymptotes', check_asymptotes, config.grid_n)
  for xi in (-2.0, 0.0, 2.0):
    runner.add_check(f'backends_xi{xi:g}', check_backends, xi,
                     config.tol_backend, config.grid_n)
  runner.add_check('hellmann_feynman', check_hellmann_feynman, config.grid_n)
  runner.add_check('hs_functional_calculus', check_hs_fiber, jobs)
  runner.add_check('edge_gap', check_edge_gap, jobs, config.grid_n)
  runner.add_warning('almost_analytic_constant', report_extension_constant)
  return runner


def correspondence_suite(config: RunConfig) -> ValidationRunner:
  jobs = resolve_jobs(config.jobs)
  runner = ValidationRunner('correspondence')
  runner.add_check('streda', check_streda, config.tol_streda)
  for levels in ((0,), (0, 1)):
    tag = ''.join(str(k) for k in levels)
    runner.add_check(f'bulk_edge_island{tag}', check_bulk_edge, config,
                     levels, jobs)
  runner.add_check('chern', check_chern, config, jobs)
  return runner


SUITES: dict[str, Callable[[RunConfig], ValidationRunner]] = {
    'specfun': specfun_suite,
    'kernels': kernels_suite,
    'fiber': fiber_suite,
    'correspondence': correspondence_suite,
}


def build_suite(name: str, config: RunConfig) -> ValidationRunner:
  """
  Build the named suite; 'all' chains every suite in a fixed order.

  Raises:
    KeyError: If the suite name is unknown
  """
  if name == 'all':
    runner = ValidationRunner('all')
    for suite in SUITES.values():
      runner.extend(suite(config))
    return runner
  try:
    factory = SUITES[name]
  except KeyError as e:
    raise KeyError(f"Unknown suite: '{name}'. "
                   f'Available: {sorted(SUITES) + ["all"]}') from e
  return factory(config)
