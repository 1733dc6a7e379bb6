import math

import numpy as np
import pytest

from diraclab.domain.errors import ConstructionError
from diraclab.domain.errors import ConvergenceError
from diraclab.domain.errors import DomainError
from diraclab.domain.errors import PreconditionError
from diraclab.domain.types import FiberProblem
from diraclab.domain.types import GridSpec
from diraclab.domain.types import level_energy
from diraclab.domain.types import SpectralIsland
from diraclab.engine.edge_fiber import fiber_matrix
from diraclab.engine.funcalc import almost_analytic_extension
from diraclab.engine.funcalc import commutator_norm
from diraclab.engine.funcalc import eigen_matrix_function
from diraclab.engine.funcalc import hs_functional_calculus
from diraclab.engine.funcalc import hs_matrix_function
from diraclab.engine.funcalc import make_gap_function
from diraclab.engine.funcalc import MAX_DEPTH
from diraclab.functions.gaussian import GaussianFunction
from diraclab.functions.zero import ZeroFunction

SIGMA3 = np.diag([1.0, -1.0])
SIGMA2 = np.array([[0.0, -1j], [1j, 0.0]])


def _dense_fiber(n: int = 64) -> np.ndarray:
  diag, off = fiber_matrix(FiberProblem(b=1.0, xi=0.0), GridSpec(x_max=8.0,
                                                                 n=n))
  return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


@pytest.fixture(scope='module')
def fiber_dense() -> np.ndarray:
  return _dense_fiber()


@pytest.fixture(scope='module')
def fiber_gap_hs(fiber_dense):
  f = make_gap_function(SpectralIsland((0,)), 1.0)
  return hs_functional_calculus(fiber_dense, f, jobs=4)


class TestMakeGapFunction:
  """Tests for make_gap_function."""

  def test_zero_level_island(self):
    """Island {0} at b = 1: plateau +-sqrt(2)/4, support +-3 sqrt(2)/4."""
    f = make_gap_function(SpectralIsland((0,)), 1.0)
    root2 = math.sqrt(2.0)
    assert f.plateau == pytest.approx((-0.25 * root2, 0.25 * root2))
    assert f.support == pytest.approx((-0.75 * root2, 0.75 * root2))

  def test_one_on_island_zero_elsewhere(self):
    """f is 1 on the island levels and 0 on every other level."""
    b = 2.5
    f = make_gap_function(SpectralIsland.from_range(1, 3), b)
    for k in range(-4, 7):
      expected = 1.0 if 1 <= k <= 3 else 0.0
      assert float(f(level_energy(k, b))) == expected

  def test_margin_moves_ramps(self):
    """A larger margin narrows the support and widens the plateau."""
    narrow = make_gap_function(SpectralIsland((0,)), 1.0, margin=0.1)
    wide = make_gap_function(SpectralIsland((0,)), 1.0, margin=0.4)
    assert wide.support[1] < narrow.support[1]
    assert wide.plateau[1] > narrow.plateau[1]

  def test_rejects_bad_margin(self):
    """margin outside (0, 1/2) is a domain error."""
    with pytest.raises(DomainError, match='margin'):
      make_gap_function(SpectralIsland((0,)), 1.0, margin=0.5)

  def test_rejects_nonpositive_field(self):
    """b <= 0 is a domain error."""
    with pytest.raises(DomainError, match='positive'):
      make_gap_function(SpectralIsland((0,)), 0.0)

  @pytest.mark.parametrize('levels', [(0,), (1,), (-2, -1)])
  def test_rejects_overflowing_levels(self, levels):
    """Levels that overflow to inf leave no usable gap."""
    with pytest.raises(ConstructionError, match='degenerate'):
      make_gap_function(SpectralIsland(levels), 1e308)


class TestAlmostAnalyticExtension:
  """Tests for almost_analytic_extension."""

  def test_restricts_to_f_on_real_axis(self):
    """f_N(x) = f(x) on the real axis."""
    f = GaussianFunction()
    ext = almost_analytic_extension(f, 3)
    x = np.linspace(-4.0, 4.0, 101)
    np.testing.assert_allclose(ext.eval(x + 0j).real, f(x), atol=1e-12)
    np.testing.assert_allclose(ext.eval(x + 0j).imag, 0.0, atol=1e-12)

  def test_vanishes_outside_strip(self):
    """f_N and its dbar vanish for |Im z| >= 1."""
    ext = almost_analytic_extension(GaussianFunction(), 3)
    z = np.array([0.3 + 1.0j, -0.2 + 1.5j, 0.1 - 1.2j])
    np.testing.assert_array_equal(ext.eval(z), 0.0)
    np.testing.assert_array_equal(ext.dbar(z), 0.0)

  def test_dbar_matches_finite_differences(self):
    """dbar is the full (d/dz1 + i d/dz2) f_N by central differences."""
    ext = almost_analytic_extension(GaussianFunction(), 3)
    z = 0.3 + 0.7j
    h = 1e-5
    d1 = (ext.eval(z + h) - ext.eval(z - h)) / (2 * h)
    d2 = (ext.eval(z + 1j * h) - ext.eval(z - 1j * h)) / (2 * h)
    assert complex(ext.dbar(z)) == pytest.approx(complex(d1 + 1j * d2),
                                                 abs=1e-7)

  def test_dbar_decays_like_power_n(self):
    """Halving Im z divides |dbar| by 2^N near the real axis."""
    ext = almost_analytic_extension(GaussianFunction(), 3)
    ratio = abs(complex(ext.dbar(0.4 + 0.02j))) / abs(
        complex(ext.dbar(0.4 + 0.01j)))
    assert ratio == pytest.approx(8.0, rel=1e-10)

  def test_decay_constant_is_positive(self):
    """C_N is finite and positive for the Gaussian."""
    ext = almost_analytic_extension(GaussianFunction(), 3)
    assert 0.0 < ext.decay_constant < math.inf

  def test_decay_bound_uses_full_dbar(self):
    """C_N bounds |dbar| <z1>^N / |z2|^N at points of its sample grid."""
    ext = almost_analytic_extension(GaussianFunction(), 3)
    z1 = np.linspace(-11.0, 11.0, 201)[::20]
    z2 = np.geomspace(1e-3, 1.0, 40)[::8]
    zz1, zz2 = np.meshgrid(z1, z2)
    ratio = np.abs(ext.dbar(zz1 + 1j * zz2)) * (1 + zz1**2)**1.5 / zz2**3
    assert np.max(ratio) <= ext.decay_constant * (1 + 1e-12)

  def test_rejects_zero_order(self):
    """N < 1 is a precondition error."""
    with pytest.raises(PreconditionError, match='N must be'):
      almost_analytic_extension(GaussianFunction(), 0)


class TestHsMatrixFunction:
  """Tests for hs_matrix_function and hs_functional_calculus."""

  def test_gaussian_of_sigma3(self):
    """e^(-A^2) of sigma3 is e^-1 times the identity."""
    result = hs_matrix_function(SIGMA3, GaussianFunction())
    np.testing.assert_allclose(result, math.exp(-1.0) * np.eye(2), atol=1e-4)

  def test_gaussian_of_hermitian_sigma2(self):
    """Complex Hermitian input takes both half planes and gives e^-1 I."""
    result = hs_matrix_function(SIGMA2, GaussianFunction())
    np.testing.assert_allclose(result, math.exp(-1.0) * np.eye(2), atol=1e-4)

  def test_one_by_one_zero_matrix(self):
    """f([[0]]) = f(0) = 1 for the Gaussian."""
    result = hs_matrix_function(np.zeros((1, 1)), GaussianFunction())
    assert result.shape == (1, 1)
    assert result[0, 0] == pytest.approx(1.0, abs=1e-4)

  def test_zero_function_gives_zero(self):
    """The zero test function maps every matrix to 0."""
    result = hs_matrix_function(SIGMA3, ZeroFunction())
    np.testing.assert_array_equal(result, 0.0)

  def test_independent_of_order(self):
    """N = 3 and N = 5 agree to 1e-5."""
    f = GaussianFunction()
    A = np.array([[0.3, 0.5], [0.5, -0.8]])
    np.testing.assert_allclose(hs_matrix_function(A, f, N=3),
                               hs_matrix_function(A, f, N=5),
                               atol=1e-5)

  def test_fiber_matrix_matches_eigen(self, fiber_dense, fiber_gap_hs):
    """Gap function of the fiber matrix matches the eigendecomposition."""
    f = make_gap_function(SpectralIsland((0,)), 1.0)
    np.testing.assert_allclose(fiber_gap_hs.value,
                               eigen_matrix_function(fiber_dense, f),
                               atol=1e-4)

  def test_fiber_matrix_commutes(self, fiber_dense, fiber_gap_hs):
    """||[A, f(A)]|| <= 1e-4 ||f(A)||."""
    F = fiber_gap_hs.value
    assert commutator_norm(fiber_dense, F) <= 1e-4 * np.linalg.norm(F, ord=2)

  def test_reports_error_estimate(self, fiber_gap_hs):
    """Diagnostics carry a small error estimate and the node count."""
    assert fiber_gap_hs.diag['abs_error_estimate'] < 1e-4
    assert fiber_gap_hs.diag['nodes'] > 0
    assert fiber_gap_hs.diag['N'] == 3

  def test_refines_until_tolerance(self):
    """A tight tolerance adds bands beyond the minimum depth."""
    out = hs_functional_calculus(SIGMA3, GaussianFunction(), depth=2, tol=1e-6)
    assert 2 < out.diag['depth'] <= MAX_DEPTH
    assert out.diag['abs_error_estimate'] <= 1e-6
    np.testing.assert_allclose(out.value, math.exp(-1.0) * np.eye(2), atol=1e-4)

  def test_stops_at_minimum_depth_when_converged(self):
    """A loose tolerance keeps the minimum depth."""
    out = hs_functional_calculus(SIGMA3, GaussianFunction(), depth=3, tol=1.0)
    assert out.diag['depth'] == 3

  def test_unconverged_bands_raise(self):
    """A tolerance out of reach by max_depth is a convergence error."""
    with pytest.raises(ConvergenceError, match='at depth 3'):
      hs_functional_calculus(SIGMA3,
                             GaussianFunction(),
                             depth=2,
                             tol=1e-14,
                             max_depth=3)

  def test_rejects_non_self_adjoint(self):
    """A non-Hermitian matrix is a domain error."""
    with pytest.raises(DomainError, match='self-adjoint'):
      hs_matrix_function(np.array([[0.0, 1.0], [0.0, 0.0]]),
                         GaussianFunction())

  def test_rejects_low_order(self):
    """N < 3 is a precondition error."""
    with pytest.raises(PreconditionError, match='N must be >= 3'):
      hs_matrix_function(SIGMA3, GaussianFunction(), N=2)

  def test_rejects_large_matrix(self):
    """Dimension above 512 is a precondition error."""
    with pytest.raises(PreconditionError, match='exceeds'):
      hs_matrix_function(np.zeros((513, 513)), GaussianFunction())


class TestEigenMatrixFunction:
  """Tests for eigen_matrix_function."""

  def test_gaussian_of_diagonal(self):
    """Diagonal input maps entrywise on the diagonal."""
    A = np.diag([0.0, 1.0, 2.0])
    np.testing.assert_allclose(eigen_matrix_function(A, GaussianFunction()),
                               np.diag(np.exp(-np.array([0.0, 1.0, 4.0]))),
                               atol=1e-14)

  def test_result_is_hermitian(self, fiber_dense):
    """f(A) is self-adjoint for self-adjoint A."""
    f = make_gap_function(SpectralIsland((0,)), 1.0)
    F = eigen_matrix_function(fiber_dense, f)
    np.testing.assert_allclose(F, F.T, atol=1e-12)
