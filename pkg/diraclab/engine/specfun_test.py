import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.integrate import solve_ivp
from scipy.special import k1e
from scipy.special import pbdv

from diraclab.domain.errors import DomainError
from diraclab.domain.errors import RangeError
from diraclab.engine.specfun import asymptotic_u
from diraclab.engine.specfun import DECAY_CONSTANT
from diraclab.engine.specfun import DERIVATIVE_DECAY_CONSTANT
from diraclab.engine.specfun import integrate_u
from diraclab.engine.specfun import macdonald_k0
from diraclab.engine.specfun import macdonald_k0_prime
from diraclab.engine.specfun import macdonald_k0_values
from diraclab.engine.specfun import parabolic_cylinder_u
from diraclab.engine.specfun import parabolic_cylinder_u_at_zero
from diraclab.engine.specfun import parabolic_cylinder_u_prime

EULER_GAMMA = 0.5772156649015329


def _k0_integral(t: float) -> float:
  value, _ = quad(lambda s: math.exp(-t * math.cosh(s)),
                  0.0,
                  np.inf,
                  epsabs=1e-15,
                  epsrel=1e-14,
                  limit=200)
  return value


def _k0_prime_integral(t: float) -> float:
  value, _ = quad(lambda s: -math.cosh(s) * math.exp(-t * math.cosh(s)),
                  0.0,
                  np.inf,
                  epsabs=1e-15,
                  epsrel=1e-14,
                  limit=200)
  return value


def _shooting_oracle(a: float, z: float, z_start: float = 30.0) -> float:
  """Inward integration seeded and normalized by the asymptotic expansion."""
  u_seed, du_seed = asymptotic_u(a, z_start)
  sol = solve_ivp(lambda t, y: [y[1], (0.25 * t * t + a) * y[0]],
                  (z_start, z),
                  [u_seed, du_seed],
                  method='DOP853',
                  rtol=1e-12,
                  atol=1e-300)
  return float(sol.y[0, -1])


class TestMacdonaldK0:
  """Tests for macdonald_k0."""

  def test_value_at_one(self):
    """K0(1) matches the tabulated value."""
    assert macdonald_k0(1.0).value == pytest.approx(0.4210244382, abs=1e-10)

  @pytest.mark.parametrize('t', [0.05, 1.0, 3.0, 10.0])
  def test_matches_integral_representation(self, t):
    """K0(t) matches quadrature of the cosh integral to 1e-10."""
    assert macdonald_k0(t).value == pytest.approx(_k0_integral(t), abs=1e-10)

  def test_error_estimate_small(self):
    """Error estimate is below 1e-12 * max(1, |K0|)."""
    for t in (1e-6, 0.5, 2.0, 30.0):
      result = macdonald_k0(t)
      assert 0 <= result.abs_error_estimate <= 1e-12 * max(1.0, abs(
          result.value))

  def test_logarithmic_small_argument(self):
    """K0(t) ~ -log(t) + log(2) - gamma for small t."""
    t = 1e-6
    expected = -math.log(t) + math.log(2.0) - EULER_GAMMA
    assert macdonald_k0(t).value == pytest.approx(expected, rel=1e-2)

  def test_exponential_decay_bound(self):
    """K0(50) <= C e^-50 with the calibrated C."""
    assert macdonald_k0(50.0).value <= DECAY_CONSTANT * math.exp(-50.0)

  def test_calibrated_constant(self):
    """The decay constant is attained at t = 1 by K1."""
    assert DECAY_CONSTANT == pytest.approx(float(k1e(1.0)), rel=1e-12)
    assert 0 < DERIVATIVE_DECAY_CONSTANT <= 1.0 + 1e-9

  def test_strictly_decreasing(self):
    """K0 is strictly decreasing on a sampled grid."""
    t = np.geomspace(1e-4, 40.0, 500)
    values = macdonald_k0_values(t)
    assert np.all(np.diff(values) < 0)

  @pytest.mark.parametrize('t', [0.0, -1.0, math.nan])
  def test_domain_error(self, t):
    """t <= 0 raises DomainError."""
    with pytest.raises(DomainError, match='t > 0'):
      macdonald_k0(t)

  def test_underflow_returns_zero(self):
    """Very large t returns 0 with the underflow threshold as estimate."""
    result = macdonald_k0(800.0)
    assert result.value == 0.0
    assert result.abs_error_estimate == np.finfo(float).tiny


class TestMacdonaldK0Prime:
  """Tests for macdonald_k0_prime."""

  def test_value_at_one(self):
    """K0'(1) matches the differentiated integral representation."""
    result = macdonald_k0_prime(1.0)
    assert result.value == pytest.approx(-0.6019072302, abs=1e-10)
    assert result.value == pytest.approx(_k0_prime_integral(1.0), abs=1e-10)

  def test_small_argument(self):
    """K0'(t) ~ -1/t for small t."""
    assert macdonald_k0_prime(1e-4).value == pytest.approx(-1e4, rel=1e-2)

  def test_decay_at_forty(self):
    """|K0'(40)| <= e^-39."""
    assert abs(macdonald_k0_prime(40.0).value) <= math.exp(-39.0)

  def test_negative_everywhere(self):
    """K0' is negative on a sampled grid."""
    for t in np.geomspace(1e-5, 100.0, 50):
      assert macdonald_k0_prime(float(t)).value < 0

  def test_derivative_bound(self):
    """|K0'(t)| <= C1 (1 + 1/t) e^-t."""
    for t in np.geomspace(1e-3, 60.0, 40):
      bound = DERIVATIVE_DECAY_CONSTANT * (1.0 + 1.0 / t) * math.exp(-t)
      assert abs(macdonald_k0_prime(float(t)).value) <= bound * (1 + 1e-12)

  def test_domain_error(self):
    """t <= 0 raises DomainError."""
    with pytest.raises(DomainError):
      macdonald_k0_prime(-2.0)


class TestParabolicCylinderU:
  """Tests for parabolic_cylinder_u and its derivative."""

  def test_gaussian_closed_form(self):
    """U(-1/2, z) = exp(-z^2/4) to 1e-12."""
    for z in np.linspace(-10.0, 10.0, 100):
      result = parabolic_cylinder_u(-0.5, float(z))
      assert result.value == pytest.approx(math.exp(-z * z / 4), abs=1e-12)

  def test_value_at_origin(self):
    """U(-1/2, 0) = 1."""
    assert parabolic_cylinder_u(-0.5, 0.0).value == pytest.approx(1.0,
                                                                  abs=1e-15)

  def test_hermite_closed_form(self):
    """U(-5/2, z) = exp(-z^2/4)(z^2 - 1)."""
    z = 1.7
    expected = math.exp(-z * z / 4) * (z * z - 1.0)
    assert parabolic_cylinder_u(-2.5, z).value == pytest.approx(expected,
                                                                rel=1e-13)

  def test_hermite_derivative(self):
    """d/dz of exp(-z^2/4) z is exp(-z^2/4)(1 - z^2/2)."""
    z = 0.9
    expected = math.exp(-z * z / 4) * (1.0 - z * z / 2)
    assert parabolic_cylinder_u_prime(-1.5, z).value == pytest.approx(
        expected, rel=1e-13)

  def test_shooting_oracle(self):
    """U(1.3, 0.7) agrees with a direct inward shooting to 1e-9 relative."""
    result = parabolic_cylinder_u(1.3, 0.7)
    assert result.value == pytest.approx(_shooting_oracle(1.3, 0.7), rel=1e-9)
    assert result.abs_error_estimate <= 1e-9 * abs(result.value)

  @pytest.mark.parametrize('a,z', [(1.3, 0.7), (-2.2, 1.5), (0.4, -2.0),
                                   (3.0, 4.0)])
  def test_matches_scipy_pbdv(self, a, z):
    """U(a, z) = D_{-a-1/2}(z) from scipy.special.pbdv."""
    d_value, d_deriv = pbdv(-a - 0.5, z)
    assert parabolic_cylinder_u(a, z).value == pytest.approx(d_value, rel=1e-6)
    assert parabolic_cylinder_u_prime(a, z).value == pytest.approx(d_deriv,
                                                                   rel=1e-6)

  @pytest.mark.parametrize('a', [0.3, -3.7, 12.0])
  def test_normalized_at_zero(self, a):
    """The integrated solution reproduces the closed form at z = 0."""
    u0, du0 = parabolic_cylinder_u_at_zero(a)
    assert parabolic_cylinder_u(a, 0.0).value == pytest.approx(u0, rel=1e-11)
    assert parabolic_cylinder_u_prime(a, 0.0).value == pytest.approx(du0,
                                                                     rel=1e-11)

  def test_closed_form_at_zero_gaussian(self):
    """The closed form at z = 0 gives (1, 0) for a = -1/2."""
    u0, du0 = parabolic_cylinder_u_at_zero(-0.5)
    assert u0 == pytest.approx(1.0)
    assert du0 == pytest.approx(0.0, abs=1e-15)

  def test_ode_residual(self):
    """U'' = (z^2/4 + a) U with U'' from fourth-order differences of U'."""
    rng = np.random.default_rng(7)
    h = 1e-3
    for a, z in rng.uniform(-5.0, 5.0, size=(200, 2)):
      derivs = [
          integrate_u(np.array([a]), z + k * h)[1][0] for k in (-2, -1, 1, 2)
      ]
      second = (derivs[0] - 8 * derivs[1] + 8 * derivs[2] -
                derivs[3]) / (12 * h)
      u = integrate_u(np.array([a]), z)[0][0]
      residual = abs(second - (0.25 * z * z + a) * u)
      assert residual <= 1e-8 * (1.0 + abs(u))

  @pytest.mark.parametrize('a,z', [(0.2, 0.5), (-1.3, 2.0), (4.1, -1.0),
                                   (-7.6, 3.0)])
  def test_recurrence(self, a, z):
    """U'(a,z) + (z/2) U(a,z) + (a+1/2) U(a+1,z) = 0."""
    values, derivs, _ = integrate_u(np.array([a, a + 1.0]), z)
    terms = [derivs[0], 0.5 * z * values[0], (a + 0.5) * values[1]]
    scale = sum(abs(t) for t in terms)
    assert abs(sum(terms)) <= 1e-8 * scale

  def test_recessive_decay(self):
    """U decays for large positive z."""
    assert abs(parabolic_cylinder_u(0.7, 12.0).value) < 1e-15

  def test_underflow_returns_zero(self):
    """Underflowing values return 0 with a positive estimate."""
    result = parabolic_cylinder_u(0.3, 60.0)
    assert result.value == 0.0
    assert result.abs_error_estimate > 0

  def test_overflow_raises(self):
    """Values beyond float range raise RangeError."""
    with pytest.raises(RangeError, match='overflows'):
      parabolic_cylinder_u(0.3, -60.0)

  @pytest.mark.parametrize('a,z', [(201.0, 0.0), (0.0, -200.5)])
  def test_range_error(self, a, z):
    """Arguments outside the working range raise RangeError."""
    with pytest.raises(RangeError, match='working range'):
      parabolic_cylinder_u(a, z)

  def test_non_finite_input(self):
    """NaN input raises DomainError."""
    with pytest.raises(DomainError, match='finite'):
      parabolic_cylinder_u(math.nan, 0.0)
