import math

import numpy as np
import pytest

from diraclab.domain.types import BranchSample
from diraclab.domain.types import CorrespondenceReport
from diraclab.domain.types import DispersionBranch
from diraclab.domain.types import EvalResult
from diraclab.domain.types import FiberProblem
from diraclab.domain.types import GridSpec
from diraclab.domain.types import HalfPlanePoint
from diraclab.domain.types import level_energy
from diraclab.domain.types import pauli
from diraclab.domain.types import PlanePoint
from diraclab.domain.types import Region
from diraclab.domain.types import SIGMA_1
from diraclab.domain.types import SIGMA_2
from diraclab.domain.types import SIGMA_3
from diraclab.domain.types import SpectralIsland
from diraclab.domain.types import SpectralParameter
from diraclab.domain.types import SpinorMatrix


class TestEvalResult:
  """Tests for EvalResult dataclass."""

  def test_float_conversion(self):
    """float() returns the value."""
    assert float(EvalResult(1.5, 0.0)) == 1.5

  def test_negative_error_rejected(self):
    """Negative error estimate raises ValueError."""
    with pytest.raises(ValueError, match='abs_error_estimate'):
      EvalResult(1.0, -1e-3)

  def test_non_finite_value_rejected(self):
    """Non-finite value raises ValueError."""
    with pytest.raises(ValueError, match='value must be finite'):
      EvalResult(math.inf, 0.0)


class TestPlanePoint:
  """Tests for PlanePoint and HalfPlanePoint."""

  def test_reflected(self):
    """Reflection flips the second coordinate."""
    assert PlanePoint(1.0, 2.0).reflected() == PlanePoint(1.0, -2.0)

  def test_distance(self):
    """Distance is Euclidean."""
    assert PlanePoint(0, 0).distance(PlanePoint(3, 4)) == pytest.approx(5.0)

  def test_half_plane_rejects_negative_x2(self):
    """HalfPlanePoint with x2 < 0 raises ValueError."""
    with pytest.raises(ValueError, match='x2 >= 0'):
      HalfPlanePoint(0.0, -0.1)

  def test_half_plane_accepts_boundary(self):
    """Points on the edge are admissible."""
    assert HalfPlanePoint(3.0, 0.0).x2 == 0.0


class TestSpinorMatrix:
  """Tests for SpinorMatrix and the Pauli constants."""

  @pytest.mark.parametrize('i', [1, 2, 3])
  def test_pauli_squares_to_identity(self, i):
    """sigma_i^2 = I2."""
    s = pauli(i)
    assert (s @ s).allclose(SpinorMatrix.identity())

  def test_pauli_anticommute(self):
    """sigma_1 sigma_2 = i sigma_3."""
    assert (SIGMA_1 @ SIGMA_2).allclose(SIGMA_3.scaled(1j))

  def test_unknown_pauli_index(self):
    """Unknown index lists the available ones."""
    with pytest.raises(KeyError, match='Available'):
      pauli(4)

  def test_wrong_shape_rejected(self):
    """Non-2x2 arrays raise ValueError."""
    with pytest.raises(ValueError, match='shape'):
      SpinorMatrix(np.zeros((3, 3)))

  def test_entries_read_only(self):
    """Entries cannot be mutated after construction."""
    m = SpinorMatrix(np.eye(2))
    with pytest.raises(ValueError):
      m.entries[0, 0] = 2.0

  def test_norms(self):
    """Spectral and Frobenius norms of sigma_1."""
    assert SIGMA_1.norm() == pytest.approx(1.0)
    assert SIGMA_1.frobenius() == pytest.approx(math.sqrt(2))


class TestSpectralParameter:
  """Tests for SpectralParameter."""

  def test_lambda(self):
    """lam is the square of sqrt_lambda."""
    assert SpectralParameter(3.0).lam == pytest.approx(9.0)

  @pytest.mark.parametrize('value', [0.0, -1.0, math.nan])
  def test_non_positive_rejected(self, value):
    """Non-positive sqrt_lambda raises ValueError."""
    with pytest.raises(ValueError, match='sqrt_lambda'):
      SpectralParameter(value)


class TestFiberProblem:
  """Tests for FiberProblem and GridSpec."""

  def test_b_must_be_positive(self):
    """b <= 0 raises ValueError."""
    with pytest.raises(ValueError, match='b must be positive'):
      FiberProblem(b=0.0, xi=1.0)

  def test_grid_for_problem_covers(self):
    """for_problem produces a box satisfying the margin."""
    p = FiberProblem(b=1.0, xi=-8.0)
    g = GridSpec.for_problem(p, lambda_max=3.0)
    assert g.covers(p, 3.0)
    assert g.x_max == pytest.approx((8.0 + 2.0 * math.sqrt(10.0)) + 6.0)

  def test_grid_odd_n_rejected(self):
    """Odd cell count raises ValueError."""
    with pytest.raises(ValueError, match='even'):
      GridSpec(x_max=10.0, n=65)

  def test_grid_unknown_scheme(self):
    """Unknown scheme lists the available ones."""
    with pytest.raises(ValueError, match='Unknown scheme'):
      GridSpec(x_max=10.0, scheme='collocated')  # type: ignore[arg-type]


class TestDispersionBranch:
  """Tests for DispersionBranch."""

  def test_arrays(self):
    """Sample arrays are exposed in order."""
    branch = DispersionBranch(k=1,
                              b=1.0,
                              samples=[
                                  BranchSample(-1.0, 1.4, 0.01),
                                  BranchSample(0.0, 1.6, 0.3),
                              ])
    np.testing.assert_allclose(branch.xi, [-1.0, 0.0])
    np.testing.assert_allclose(branch.lam, [1.4, 1.6])
    assert branch.asymptote == pytest.approx(math.sqrt(2))

  def test_unordered_samples_rejected(self):
    """Samples must be strictly increasing in xi."""
    with pytest.raises(ValueError, match='strictly'):
      DispersionBranch(k=0,
                       b=1.0,
                       samples=[
                           BranchSample(0.0, 0.1, 0.1),
                           BranchSample(0.0, 0.2, 0.1),
                       ])

  def test_negative_asymptote(self):
    """Negative labels have negative asymptotes."""
    expected = -2.0 * math.sqrt(2)
    assert DispersionBranch(k=-2, b=2.0).asymptote == pytest.approx(expected)


class TestSpectralIsland:
  """Tests for SpectralIsland."""

  def test_sorted_and_counted(self):
    """Levels are sorted and N counts them."""
    island = SpectralIsland((1, 0, 2))
    assert island.levels == (0, 1, 2)
    assert island.N == 3
    assert (island.lo, island.hi) == (0, 2)

  def test_non_contiguous_rejected(self):
    """Gaps in the level set raise ValueError."""
    with pytest.raises(ValueError, match='contiguous'):
      SpectralIsland((0, 2))

  def test_empty_rejected(self):
    """Empty island raises ValueError."""
    with pytest.raises(ValueError, match='at least one'):
      SpectralIsland(())

  def test_energies(self):
    """Energies follow sgn(k) sqrt(2|k|b)."""
    island = SpectralIsland.from_range(-1, 1)
    np.testing.assert_allclose(island.energies(2.0), [-2.0, 0.0, 2.0])

  def test_level_energy_zero(self):
    """Level 0 sits at zero energy."""
    assert level_energy(0, 5.0) == 0.0


class TestRegion:
  """Tests for Region."""

  def test_unit_cell_area(self):
    """Unit cell has area 1."""
    assert Region().area == 1.0

  def test_strip_requires_l(self):
    """Strip with L < 1 raises ValueError."""
    with pytest.raises(ValueError, match='L >= 1'):
      Region(kind='strip', L=0.5)

  def test_semi_infinite_bounds(self):
    """Semi-infinite strip extends to infinity."""
    _, (lo, hi) = Region(kind='semi_infinite_strip').bounds()
    assert lo == 0.0 and math.isinf(hi)


class TestCorrespondenceReport:
  """Tests for CorrespondenceReport."""

  def _report(self, **overrides) -> CorrespondenceReport:
    fields = dict(b=1.0,
                  island=(0,),
                  bulk_value=0.16,
                  edge_value=0.159,
                  streda_slope=0.16,
                  chern_estimate=1.0,
                  spectral_flow=1,
                  abs_err=0.001,
                  rel_err=0.001 / 0.16)
    fields.update(overrides)
    return CorrespondenceReport(**fields)

  def test_to_dict_keys(self):
    """to_dict carries the documented report keys."""
    d = self._report(passed=True).to_dict()
    for key in ('b', 'island', 'bulk_value', 'edge_value', 'streda_slope',
                'chern_estimate', 'spectral_flow', 'abs_err', 'rel_err',
                'pass'):
      assert key in d
    assert d['pass'] is True
    assert d['island'] == [0]

  def test_abs_err_consistency(self):
    """abs_err must equal |bulk - edge|."""
    with pytest.raises(ValueError, match='abs_err'):
      self._report(abs_err=0.5)
