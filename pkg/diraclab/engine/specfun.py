"""
Scalar special functions with error estimates.

Functions:
  macdonald_k0: K0(t) for t > 0
  macdonald_k0_prime: K0'(t) = -K1(t) for t > 0
  parabolic_cylinder_u: Weber function U(a, z), recessive as z -> +inf
  parabolic_cylinder_u_prime: dU/dz
  parabolic_cylinder_u_at_zero: closed-form U(a, 0) and U'(a, 0)

K0 and K1 come from the exponentially scaled Cephes routines in scipy.special
(series/Chebyshev below t = 2, scaled asymptotic expansion above). U(a, z) is
integrated inward from the asymptotic region and normalized at z = 0 against
the closed-form values there.

All functions are pure. The only module state is the pair of decay constants
calibrated at import.
"""

import logging
import math

import numpy as np
from numpy.polynomial import hermite_e
from numpy.polynomial import polynomial
from scipy.integrate import solve_ivp
from scipy.special import k0e
from scipy.special import k1e
from scipy.special import rgamma

from diraclab.domain.errors import ConvergenceError
from diraclab.domain.errors import DomainError
from diraclab.domain.errors import RangeError
from diraclab.domain.types import EvalResult

logger = logging.getLogger(__name__)

_EPS = float(np.finfo(float).eps)
_TINY = float(np.finfo(float).tiny)
_LOG_TINY = math.log(_TINY)
_LOG_HUGE = math.log(float(np.finfo(float).max))

# Relative error of k0e/k1e times exp(-t), with headroom.
_BESSEL_REL_ERR = 8.0 * _EPS

U_MAX_ORDER = 200.0
U_MAX_ARGUMENT = 200.0
_Z_START_MIN = 30.0
_HERMITE_MAX_DEGREE = 60
_RTOL = 1e-13
_RTOL_CHECK = 1e-11


def _check_positive(t: float) -> None:
  if not math.isfinite(t) or t <= 0:
    raise DomainError(f'Macdonald functions need t > 0, got t={t}')


def macdonald_k0_values(t: np.ndarray) -> np.ndarray:
  """
  Vectorized K0(t) without error estimates.

  Args:
    t: Positive arguments (any shape)

  Returns:
    K0(t), with 0 where exp(-t) underflows
  """
  t = np.asarray(t, dtype=float)
  with np.errstate(under='ignore'):
    return k0e(t) * np.exp(-t)


def macdonald_k0_prime_values(t: np.ndarray) -> np.ndarray:
  """Vectorized K0'(t) = -K1(t) without error estimates."""
  t = np.asarray(t, dtype=float)
  with np.errstate(under='ignore'):
    return -k1e(t) * np.exp(-t)


def _scaled_result(scaled: float, t: float) -> EvalResult:
  if -t < _LOG_TINY:
    return EvalResult(0.0, _TINY)
  value = scaled * math.exp(-t)
  return EvalResult(value, _BESSEL_REL_ERR * abs(value))


def macdonald_k0(t: float) -> EvalResult:
  """
  Macdonald function K0(t).

  Args:
    t: Positive argument

  Returns:
    EvalResult with relative error about 1e-15

  Raises:
    DomainError: If t <= 0 or t is not finite
  """
  _check_positive(t)
  return _scaled_result(float(k0e(t)), t)


def macdonald_k0_prime(t: float) -> EvalResult:
  """
  Derivative K0'(t) = -K1(t), negative for every t > 0.

  Args:
    t: Positive argument

  Returns:
    EvalResult with relative error about 1e-15

  Raises:
    DomainError: If t <= 0 or t is not finite
  """
  _check_positive(t)
  return _scaled_result(-float(k1e(t)), t)


def _calibrate_decay_constants() -> tuple[float, float]:
  """
  Constants of the decay bounds for K0 and K0'.

  C bounds max(K0(t), |K0'(t)|) e^t on t >= 1; C1 bounds |K0'(t)| e^t / (1+1/t)
  on t > 0. Both are sampled maxima (the scaled functions are monotone).
  """
  t = np.geomspace(1.0, 50.0, 400)
  c = float(np.max(np.maximum(k0e(t), k1e(t))))
  ts = np.geomspace(1e-8, 50.0, 800)
  c1 = float(np.max(k1e(ts) * ts / (1.0 + ts)))
  logger.debug('Macdonald decay constants: C=%.12g, C1=%.12g', c, c1)
  return c, c1


DECAY_CONSTANT, DERIVATIVE_DECAY_CONSTANT = _calibrate_decay_constants()


def parabolic_cylinder_u_at_zero(a: float) -> tuple[float, float]:
  """
  Closed-form U(a, 0) and U'(a, 0).

  U(a, 0) = sqrt(pi) 2^(-a/2-1/4) / Gamma(3/4 + a/2)
  U'(a, 0) = -sqrt(pi) 2^(-a/2+1/4) / Gamma(1/4 + a/2)

  Args:
    a: Order

  Returns:
    Tuple (U(a, 0), U'(a, 0))
  """
  sqrt_pi = math.sqrt(math.pi)
  u0 = sqrt_pi * 2.0**(-0.5 * a - 0.25) * float(rgamma(0.75 + 0.5 * a))
  du0 = -sqrt_pi * 2.0**(-0.5 * a + 0.25) * float(rgamma(0.25 + 0.5 * a))
  return u0, du0


def _asymptotic_series(a: float, z: float,
                       terms: int = 8) -> tuple[float, float]:
  """
  Series factor S of U ~ e^(-z^2/4) z^(-a-1/2) S and the matching factor of U'.

  S = sum_s (-1)^s (a+1/2)_(2s) / (s! (2 z^2)^s), cut before its terms start
  growing.
  """
  mu = a + 0.5
  series = 0.0
  d_series = 0.0
  coeff = 1.0
  previous = math.inf
  for s in range(terms):
    if s > 0:
      coeff *= -(mu + 2 * s - 2) * (mu + 2 * s - 1) / (s * 2.0 * z * z)
    if abs(coeff) > previous:
      break
    previous = abs(coeff)
    series += coeff
    d_series += coeff * (-0.5 * z - (mu + 2 * s) / z)
  return series, d_series


def asymptotic_u(a: float, z: float, terms: int = 8) -> tuple[float, float]:
  """
  Large-z expansion of U(a, z) and U'(a, z).

  Args:
    a: Order
    z: Positive argument, large compared with sqrt(|a|)
    terms: Maximum number of series terms

  Returns:
    Tuple (U, U'); underflows to zero for large z
  """
  series, d_series = _asymptotic_series(a, z, terms)
  log_prefactor = -0.25 * z * z - (a + 0.5) * math.log(z)
  prefactor = math.exp(log_prefactor) if log_prefactor > _LOG_TINY else 0.0
  return prefactor * series, prefactor * d_series


def _check_u_range(a: float, z: float) -> None:
  if not (math.isfinite(a) and math.isfinite(z)):
    raise DomainError(f'U(a, z) needs finite arguments, got a={a}, z={z}')
  if abs(a) > U_MAX_ORDER or abs(z) > U_MAX_ARGUMENT:
    raise RangeError(f'U(a, z) working range is |a| <= {U_MAX_ORDER}, '
                     f'|z| <= {U_MAX_ARGUMENT}; got a={a}, z={z}')


def _hermite_degree(a: float) -> int | None:
  n = -(a + 0.5)
  rounded = round(n)
  if 0 <= rounded <= _HERMITE_MAX_DEGREE and abs(n - rounded) <= 4 * _EPS * max(
      1.0, abs(n)):
    return int(rounded)
  return None


def _from_log(sign: float, log_abs: float) -> float:
  if log_abs > _LOG_HUGE:
    raise RangeError(f'U(a, z) overflows (log|U| = {log_abs:.1f})')
  if log_abs < _LOG_TINY:
    return 0.0
  return sign * math.exp(log_abs)


def _hermite_u(n: int, z: float) -> tuple[EvalResult, EvalResult]:
  """U(-n-1/2, z) = e^(-z^2/4) He_n(z) and its derivative."""
  coeffs = np.zeros(n + 1)
  coeffs[n] = 1.0
  he = float(hermite_e.hermeval(z, coeffs))
  d_he = float(hermite_e.hermeval(z, hermite_e.hermeder(coeffs))) if n else 0.0
  # Rounding bound: the monomial form evaluated with absolute coefficients.
  monomial = np.abs(hermite_e.herme2poly(coeffs))
  magnitude = float(polynomial.polyval(abs(z), monomial))
  scale_log = math.log(magnitude * (1.0 + abs(z))) - 0.25 * z * z
  scale = _from_log(1.0, scale_log) if scale_log < _LOG_HUGE else math.inf
  results = []
  for poly in (he, d_he - 0.5 * z * he):
    if poly == 0.0:
      value = 0.0
    else:
      value = _from_log(math.copysign(1.0, poly),
                        math.log(abs(poly)) - 0.25 * z * z)
    results.append(EvalResult(value, 4.0 * (n + 2) * _EPS * max(scale, _TINY)))
  return results[0], results[1]


def _breakpoints(
    z_start: float,
    z_end: float,
    stops: tuple[float, ...],
    a_max: float,
) -> list[float]:
  """Descending chunk boundaries from z_start to z_end including the stops."""
  points = [z_start]
  t = z_start
  pending = sorted(set(stops), reverse=True)
  while t > z_end:
    # Keep the growth within one chunk below e^30.
    rate = math.sqrt(0.25 * t * t + a_max)
    nxt = max(t - min(2.0, 30.0 / max(rate, 1.0)), z_end)
    while pending and pending[0] >= t:
      pending.pop(0)
    if pending and pending[0] > nxt:
      nxt = pending.pop(0)
    points.append(nxt)
    t = nxt
  return points


def integrate_u(
    a: np.ndarray,
    z: float,
    rtol: float = _RTOL,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
  """
  U(a, z) and U'(a, z) for several orders at one argument.

  The ODE y'' = (z^2/4 + a) y is integrated from the asymptotic region down to
  min(z, 0) in chunks; the state is renormalized after every chunk and the
  scale tracked in log form. The solution is then matched at z = 0 to the
  closed-form values by least squares.

  Args:
    a: Orders (1-D array)
    z: Argument
    rtol: Relative tolerance of the ODE solver

  Returns:
    Tuple (values, derivatives, match_residuals). match_residuals is the
    relative mismatch of the least-squares fit at z = 0 (zero for an exact
    recessive solution).

  Raises:
    ConvergenceError: If the ODE solver fails
    RangeError: If a value overflows
  """
  a = np.atleast_1d(np.asarray(a, dtype=float))
  m = a.size
  a_max = float(np.max(np.abs(a)))
  z_start = max(_Z_START_MIN, 2.0 * math.sqrt(a_max) + 10.0, z + 10.0)
  z_end = min(z, 0.0)

  state = np.empty(2 * m)
  state[:m] = 1.0
  # Only the ratio U'/U at z_start matters; the dominant solution picked up by
  # a seed error dies off as e^(-z^2/2) on the way in.
  for i, ai in enumerate(a):
    series, d_series = _asymptotic_series(float(ai), z_start)
    state[m + i] = d_series / series
  log_scale = np.zeros(m)

  def rhs(t, y):
    return np.concatenate([y[m:], (0.25 * t * t + a) * y[:m]])

  saved: dict[float, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
  points = _breakpoints(z_start, z_end, (0.0, z), a_max)
  current = points[0]
  for nxt in points[1:]:
    sol = solve_ivp(rhs, (current, nxt),
                    state,
                    method='DOP853',
                    rtol=rtol,
                    atol=rtol * 1e-3)
    if not sol.success:
      raise ConvergenceError(f'U(a, z) integration failed: {sol.message}',
                             diagnostics={
                                 'z': z,
                                 'interval': (current, nxt)
                             })
    state = sol.y[:, -1]
    norms = np.hypot(state[:m], state[m:])
    state = state / np.concatenate([norms, norms])
    log_scale = log_scale + np.log(norms)
    if nxt == 0.0 or nxt == z:
      saved[nxt] = (state[:m].copy(), state[m:].copy(), log_scale.copy())
    current = nxt

  values = np.empty(m)
  derivs = np.empty(m)
  residuals = np.empty(m)
  y0, dy0, log0 = saved[0.0]
  yz, dyz, logz = saved[z]
  for i in range(m):
    u0, du0 = parabolic_cylinder_u_at_zero(float(a[i]))
    exact_norm = math.hypot(u0, du0)
    # Exact values rescaled to the mantissa at z = 0.
    kappa = (y0[i] * u0 + dy0[i] * du0) / (y0[i]**2 + dy0[i]**2)
    residuals[i] = math.hypot(u0 - kappa * y0[i],
                              du0 - kappa * dy0[i]) / exact_norm
    shift = logz[i] - log0[i] + math.log(abs(kappa))
    sign = math.copysign(1.0, kappa)
    for target, mantissa in ((values, yz[i]), (derivs, dyz[i])):
      if mantissa == 0.0:
        target[i] = 0.0
      else:
        target[i] = _from_log(sign * math.copysign(1.0, mantissa),
                              shift + math.log(abs(mantissa)))
  return values, derivs, residuals


def _evaluate_u(a: float, z: float) -> tuple[EvalResult, EvalResult]:
  _check_u_range(a, z)
  n = _hermite_degree(a)
  if n is not None:
    return _hermite_u(n, z)

  values, derivs, residuals = integrate_u(np.array([a]), z, _RTOL)
  check_values, check_derivs, _ = integrate_u(np.array([a]), z, _RTOL_CHECK)
  u, du = float(values[0]), float(derivs[0])
  mismatch = float(residuals[0])
  if mismatch > 1e-8:
    logger.warning('U(%g, %g): recessive match residual %.2e', a, z, mismatch)
  u_err = abs(u - float(check_values[0])) + (mismatch + 8 * _EPS) * abs(u)
  du_err = abs(du - float(check_derivs[0])) + (mismatch + 8 * _EPS) * abs(du)
  if u == 0.0:
    u_err = max(u_err, _TINY)
  if du == 0.0:
    du_err = max(du_err, _TINY)
  return EvalResult(u, u_err), EvalResult(du, du_err)


def parabolic_cylinder_u(a: float, z: float) -> EvalResult:
  """
  Weber parabolic cylinder function U(a, z).

  The solution of y'' = (z^2/4 + a) y decaying as z -> +inf, normalized by
  U(a, z) ~ e^(-z^2/4) z^(-a-1/2). For a + 1/2 = -n with n <= 60 the closed
  form e^(-z^2/4) He_n(z) is used.

  Args:
    a: Order, |a| <= 200
    z: Argument, |z| <= 200

  Returns:
    EvalResult; the error estimate compares two solver tolerances and adds the
    mismatch of the normalization fit

  Raises:
    RangeError: Outside the working range or on overflow
    DomainError: Non-finite input
  """
  return _evaluate_u(a, z)[0]


def parabolic_cylinder_u_prime(a: float, z: float) -> EvalResult:
  """Derivative dU(a, z)/dz; same method and range as parabolic_cylinder_u."""
  return _evaluate_u(a, z)[1]
