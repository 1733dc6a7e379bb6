import dataclasses
import math

import numpy as np
import pytest

from diraclab.domain.errors import AmbiguousCrossingError
from diraclab.domain.errors import CoverageError
from diraclab.domain.errors import DomainError
from diraclab.domain.errors import PreconditionError
from diraclab.domain.errors import TruncationError
from diraclab.domain.types import BranchSample
from diraclab.domain.types import DispersionBranch
from diraclab.domain.types import Region
from diraclab.domain.types import SpectralIsland
from diraclab.engine.correspondence import branch_current
from diraclab.engine.correspondence import bulk_edge_report
from diraclab.engine.correspondence import bulk_trace
from diraclab.engine.correspondence import bulk_trace_derivative
from diraclab.engine.correspondence import bulk_trace_hs
from diraclab.engine.correspondence import chern_zero_mode
from diraclab.engine.correspondence import edge_current
from diraclab.engine.correspondence import edge_current_terms
from diraclab.engine.correspondence import ids
from diraclab.engine.correspondence import ids_from_kernel
from diraclab.engine.correspondence import island_flow
from diraclab.engine.correspondence import landau_ladder_matrix
from diraclab.engine.correspondence import landau_levels
from diraclab.engine.correspondence import report_branch_labels
from diraclab.engine.correspondence import spectrum_table
from diraclab.engine.correspondence import spectral_flow
from diraclab.engine.correspondence import streda_slope
from diraclab.engine.correspondence import zero_mode_projection_kernel
from diraclab.engine.funcalc import make_gap_function
from diraclab.functions.gaussian import GaussianFunction
from diraclab.functions.zero import ZeroFunction

TWO_PI = 2.0 * math.pi
STREDA_GRID = [0.8, 0.9, 1.0, 1.1, 1.2]

# sum_k e^(-2|k|) and sum_k |k| e^(-2|k|) over all integers k.
_Q = math.exp(-2.0)
GAUSSIAN_LEVEL_SUM = 1.0 + 2.0 * _Q / (1.0 - _Q)
GAUSSIAN_WEIGHTED_SUM = 2.0 * _Q / (1.0 - _Q)**2


@pytest.fixture(scope='module')
def zero_gap():
  return make_gap_function(SpectralIsland((0,)), 1.0)


@pytest.fixture(scope='module')
def chern_unit_field():
  return chern_zero_mode(1.0)


def _line_branch(k: int, xis, lams, velocities) -> DispersionBranch:
  return DispersionBranch(k=k,
                          b=1.0,
                          samples=[
                              BranchSample(xi=x, lam=l, velocity=v)
                              for x, l, v in zip(xis, lams, velocities)
                          ])


class TestLandauLevels:
  """Tests for landau_levels."""

  def test_levels_at_field_two(self):
    """b = 2, k_max = 2 gives -2 sqrt2, -2, 0, 2, 2 sqrt2."""
    assert landau_levels(2.0, 2) == pytest.approx(
        [-2.0 * math.sqrt(2), -2.0, 0.0, 2.0, 2.0 * math.sqrt(2)])

  def test_zero_cutoff(self):
    """k_max = 0 leaves the zero level only."""
    assert landau_levels(3.7, 0) == [0.0]

  def test_spacing_decreases(self):
    """Gaps between consecutive positive levels shrink."""
    levels = np.array(landau_levels(1.0, 20))
    gaps = np.diff(levels[20:])
    assert np.all(np.diff(gaps) < 0)

  def test_rejects_negative_cutoff(self):
    """k_max < 0 is a precondition error."""
    with pytest.raises(PreconditionError, match='k_max'):
      landau_levels(1.0, -1)

  def test_spectrum_table(self):
    """b = 1, k_max = 3 gives seven rows with the zero level once."""
    table = spectrum_table(1.0, 3)
    assert list(table['k']) == list(range(-3, 4))
    assert list(table['lambda']) == pytest.approx([
        -math.sqrt(6), -2.0, -math.sqrt(2), 0.0,
        math.sqrt(2), 2.0,
        math.sqrt(6)
    ])


class TestBulkTrace:
  """Tests for bulk_trace and bulk_trace_derivative."""

  def test_gaussian_series(self):
    """e^(-t^2) at b = 1 sums to (1 + 2 sum e^(-2k)) / 2 pi ~ 0.208976."""
    value = bulk_trace(GaussianFunction(), 1.0)
    assert value == pytest.approx(GAUSSIAN_LEVEL_SUM / TWO_PI, abs=1e-12)
    assert value == pytest.approx(0.208976, abs=1e-6)

  def test_zero_function(self):
    """f = 0 gives 0."""
    assert bulk_trace(ZeroFunction(), 1.0) == 0.0
    assert bulk_trace_derivative(ZeroFunction(), 1.0) == 0.0

  def test_gap_function_counts_one_level(self, zero_gap):
    """The island {0} gap function gives 1 / 2 pi."""
    assert bulk_trace(zero_gap, 1.0) == pytest.approx(1.0 / TWO_PI, abs=1e-15)

  def test_truncated_sum_rejected(self):
    """A cutoff inside the Gaussian tail is a truncation error."""
    with pytest.raises(TruncationError, match='does not decay'):
      bulk_trace(GaussianFunction(), 1.0, k_max=3)

  def test_gaussian_derivative(self):
    """dB/db for e^(-t^2) at b = 1 matches the closed-form series."""
    expected = (GAUSSIAN_LEVEL_SUM - 2.0 * GAUSSIAN_WEIGHTED_SUM) / TWO_PI
    value = bulk_trace_derivative(GaussianFunction(), 1.0)
    assert value == pytest.approx(expected, abs=1e-12)
    assert value == pytest.approx(0.093737, abs=1e-5)

  @pytest.mark.parametrize('b', [0.5, 1.0, 2.3])
  def test_derivative_matches_finite_differences(self, b):
    """dB/db agrees with central differences of bulk_trace at h = 1e-5."""
    f = GaussianFunction()
    h = 1e-5
    numeric = (bulk_trace(f, b + h, 60) - bulk_trace(f, b - h, 60)) / (2 * h)
    assert bulk_trace_derivative(f, b, 60) == pytest.approx(numeric, abs=1e-8)

  def test_gap_derivative_is_level_sum(self):
    """For f' vanishing on the levels, dB/db = (1/2 pi) sum f(e_k)."""
    f = make_gap_function(SpectralIsland.from_range(-1, 2), 1.5)
    assert bulk_trace_derivative(f, 1.5) == pytest.approx(4.0 / TWO_PI,
                                                          abs=1e-12)

  def test_rejects_nonpositive_field(self):
    """b <= 0 is a domain error."""
    with pytest.raises(DomainError, match='positive'):
      bulk_trace(GaussianFunction(), -1.0)


class TestIdsAndStreda:
  """Tests for ids and streda_slope."""

  def test_ids_values(self):
    """N b / 2 pi per island."""
    assert ids(SpectralIsland((0, 1, 2)), 1.0) == pytest.approx(3.0 / TWO_PI)
    assert ids(SpectralIsland((0,)), TWO_PI) == pytest.approx(1.0)

  @pytest.mark.parametrize('levels', [(0,), (0, 1), (-1, 0, 1), (2, 3, 4)])
  def test_ids_equals_bulk_trace_of_gap(self, levels):
    """ids equals the bulk trace of the island's gap function."""
    island = SpectralIsland(levels)
    f = make_gap_function(island, 1.3)
    assert ids(island, 1.3) == pytest.approx(bulk_trace(f, 1.3), abs=1e-12)

  @pytest.mark.parametrize('levels', [(0,), (0, 1), (0, 1, 2)])
  def test_slope_gives_chern(self, levels):
    """Slope N / 2 pi over b in [0.8, 1.2]; Chern estimate N."""
    out = streda_slope(SpectralIsland(levels), STREDA_GRID)
    slope, chern = out.value
    assert slope == pytest.approx(len(levels) / TWO_PI, abs=1e-9)
    assert chern == pytest.approx(len(levels), abs=1e-9)
    assert out.diag['residual'] <= 1e-12

  def test_too_few_points(self):
    """Two field values are a precondition error."""
    with pytest.raises(PreconditionError, match='at least 3'):
      streda_slope(SpectralIsland((0,)), [1.0, 1.1, 1.1])

  def test_closed_gap(self):
    """b <= 0 on the grid is a precondition error."""
    with pytest.raises(PreconditionError, match='gaps close'):
      streda_slope(SpectralIsland((0,)), [-0.1, 0.5, 1.0])


class TestEdgeCurrent:
  """Tests for branch_current and edge_current."""

  def test_zero_level_island(self, zero_gap, unit_field_branches):
    """Island {0} at b = 1 carries edge current 1 / 2 pi."""
    value = edge_current(zero_gap, 1.0, unit_field_branches)
    assert value == pytest.approx(1.0 / TWO_PI, rel=1e-3)

  def test_two_level_island(self, unit_field_branches):
    """Island {0, 1} at b = 1 carries edge current 2 / 2 pi."""
    f = make_gap_function(SpectralIsland((0, 1)), 1.0)
    value = edge_current(f, 1.0, unit_field_branches)
    assert value == pytest.approx(2.0 / TWO_PI, rel=1e-3)

  def test_matches_bulk_derivative(self, zero_gap, unit_field_branches):
    """Edge current equals dB/db of the gap function within 1e-3."""
    edge = edge_current(zero_gap, 1.0, unit_field_branches)
    assert abs(edge - bulk_trace_derivative(zero_gap, 1.0)) <= 1e-3

  def test_telescoping(self, zero_gap, unit_field_branches):
    """Each branch integral equals f(lambda(end)) - f(lambda(start))."""
    for branch in unit_field_branches:
      expected = float(zero_gap(branch.samples[-1].lam) -
                       zero_gap(branch.samples[0].lam))
      assert branch_current(zero_gap, branch) == pytest.approx(expected,
                                                               abs=1e-6)

  def test_negative_branch_contributes_nothing(self, zero_gap,
                                               unit_field_branches):
    """The k = -1 branch enters and leaves supp f' below the island."""
    terms = edge_current_terms(zero_gap, 1.0, unit_field_branches)
    assert terms[-1] == pytest.approx(0.0, abs=1e-6)
    assert terms[0] == pytest.approx(1.0 / TWO_PI, abs=1e-6)

  def test_zero_function(self, unit_field_branches):
    """f = 0 gives 0."""
    assert edge_current(ZeroFunction(), 1.0, unit_field_branches) == 0.0

  def test_truncated_branch(self, zero_gap, unit_field_branch_map):
    """A branch ending inside supp f' is a coverage error."""
    branch = unit_field_branch_map[0]
    inside = [s for s in branch.samples if s.lam < 0.8]
    cut = dataclasses.replace(branch, samples=inside)
    with pytest.raises(CoverageError, match='ends inside'):
      edge_current(zero_gap, 1.0, [cut])

  def test_missing_branch(self, zero_gap, unit_field_branch_map):
    """A level in supp f without a branch is a coverage error."""
    with pytest.raises(CoverageError, match='no traced branch'):
      edge_current(zero_gap, 1.0, [unit_field_branch_map[1]])

  def test_gaussian_not_gap_supported(self, unit_field_branches):
    """A test function with f' on the bulk levels has no edge coverage."""
    with pytest.raises(CoverageError):
      edge_current(GaussianFunction(), 1.0, unit_field_branches)


class TestSpectralFlow:
  """Tests for spectral_flow and island_flow."""

  def test_first_positive_gap(self, unit_field_branches):
    """One branch crosses mu = 1 in the gap (0, sqrt2)."""
    assert spectral_flow(1.0, unit_field_branches) == 1

  def test_second_positive_gap(self, unit_field_branches):
    """Two branches cross mu = 1.7 in the gap (sqrt2, 2)."""
    assert spectral_flow(1.7, unit_field_branches) == 2

  def test_edge_gap(self, unit_field_branch_map, unit_field_branches):
    """Nothing crosses an energy between sup lambda_-1 and 0."""
    mu = 0.5 * float(np.max(unit_field_branch_map[-1].lam))
    assert spectral_flow(mu, unit_field_branches) == 0

  def test_lower_gap_nets_zero(self, unit_field_branches):
    """The k = -1 branch crosses -sqrt2/2 up and down or not at all."""
    assert spectral_flow(-0.5 * math.sqrt(2), unit_field_branches) == 0

  @pytest.mark.parametrize('levels', [(0,), (0, 1)])
  def test_island_flow_counts_levels(self, levels, unit_field_branches):
    """island_flow equals the number of island levels."""
    island = SpectralIsland(levels)
    assert island_flow(island, 1.0, unit_field_branches) == len(levels)

  def test_mu_on_level_rejected(self, unit_field_branches):
    """mu on a bulk level is a precondition error."""
    with pytest.raises(PreconditionError, match='bulk level'):
      spectral_flow(math.sqrt(2), unit_field_branches)

  def test_ambiguous_touch(self):
    """A stationary touch of mu is an ambiguous crossing."""
    branch = _line_branch(0, [0.0, 1.0, 2.0], [0.5, 1.0, 0.5],
                          [0.5, 0.0, -0.5])
    with pytest.raises(AmbiguousCrossingError, match='touches'):
      spectral_flow(1.0, [branch])

  def test_downward_crossing_counts_negative(self):
    """A decreasing branch crossing mu counts -1."""
    branch = _line_branch(-1, [0.0, 1.0, 2.0], [-0.5, -1.0, -1.6],
                          [-0.5, -0.55, -0.6])
    assert spectral_flow(-0.7, [branch]) == -1


class TestLadderAndHs:
  """Tests for landau_ladder_matrix and bulk_trace_hs."""

  def test_ladder_spectrum(self):
    """The ladder matrix has exactly the levels |k| <= k_max."""
    values = np.linalg.eigvalsh(landau_ladder_matrix(1.7, 5))
    np.testing.assert_allclose(values, landau_levels(1.7, 5), atol=1e-12)

  def test_ladder_zero_cutoff(self):
    """k_max = 0 gives the 1 x 1 zero matrix."""
    np.testing.assert_array_equal(landau_ladder_matrix(1.0, 0), [[0.0]])

  def test_hs_bulk_trace_of_gap(self, zero_gap):
    """Tr f(ladder) by Helffer-Sjostrand reproduces 1 / 2 pi."""
    assert bulk_trace_hs(zero_gap, 1.0, 4) == pytest.approx(1.0 / TWO_PI,
                                                            abs=1e-4)


class TestZeroModeKernel:
  """Tests for zero_mode_projection_kernel and ids_from_kernel."""

  @pytest.mark.parametrize('b', [0.5, 1.0, 3.0])
  def test_construction_checks(self, b):
    """Idempotency and diagonal trace pass at construction."""
    kernel = zero_mode_projection_kernel(b)
    assert kernel.diag['trace_residual'] <= 1e-8
    assert kernel.diag['idempotency_residual'] <= 1e-6 * b / TWO_PI

  def test_diagonal_trace(self):
    """tr P(x, x) = b / 2 pi at random points."""
    kernel = zero_mode_projection_kernel(2.0)
    rng = np.random.default_rng(7)
    x = rng.uniform(-5.0, 5.0, size=(20, 2))
    traces = np.trace(kernel.kernel(x, x), axis1=-2, axis2=-1)
    np.testing.assert_allclose(traces, 2.0 / TWO_PI, atol=1e-12)

  def test_only_first_component(self):
    """Every entry but (1, 1) vanishes."""
    kernel = zero_mode_projection_kernel(1.0)
    m = kernel.kernel(np.array([0.2, 0.4]), np.array([-0.3, 1.1]))
    assert m[0, 0] != 0
    assert m[0, 1] == m[1, 0] == m[1, 1] == 0

  def test_magnetic_covariance(self):
    """Magnetic translations twist P by the phases e^(+-ib phi2(., eta))."""
    b = 1.3
    kernel = zero_mode_projection_kernel(b)
    rng = np.random.default_rng(11)
    for _ in range(10):
      x, xp, eta = rng.uniform(-2.0, 2.0, size=(3, 2))
      phi_x = (eta[0] - x[0]) * eta[1]
      phi_xp = (eta[0] - xp[0]) * eta[1]
      shifted = kernel.kernel(x - eta, xp - eta)[0, 0]
      expected = np.exp(1j * b * phi_x) * shifted * np.exp(-1j * b * phi_xp)
      assert kernel.kernel(x, xp)[0, 0] == pytest.approx(expected, abs=1e-14)

  def test_hermitian(self):
    """P(x', x) is the conjugate of P(x, x')."""
    kernel = zero_mode_projection_kernel(1.0)
    x, xp = np.array([0.3, -0.2]), np.array([1.1, 0.9])
    assert kernel.kernel(xp, x)[0, 0] == pytest.approx(
        np.conj(kernel.kernel(x, xp)[0, 0]))

  def test_ids_from_kernel(self):
    """The unit-cell density of the zero-mode kernel is b / 2 pi."""
    kernel = zero_mode_projection_kernel(2.5)
    assert ids_from_kernel(kernel) == pytest.approx(2.5 / TWO_PI, abs=1e-12)
    strip = Region(kind='strip', L=3.0)
    assert ids_from_kernel(kernel, strip) == pytest.approx(2.5 / TWO_PI,
                                                           abs=1e-12)

  def test_ids_from_kernel_unbounded(self):
    """The semi-infinite strip has no density."""
    kernel = zero_mode_projection_kernel(1.0)
    with pytest.raises(PreconditionError, match='unbounded'):
      ids_from_kernel(kernel, Region(kind='semi_infinite_strip'))

  def test_rejects_nonpositive_field(self):
    """b <= 0 is a domain error."""
    with pytest.raises(DomainError, match='positive'):
      zero_mode_projection_kernel(0.0)


class TestChernZeroMode:
  """Tests for chern_zero_mode."""

  def test_unit_field(self, chern_unit_field):
    """Ch = 1 at b = 1."""
    assert chern_unit_field.value == pytest.approx(1.0, abs=1e-3)
    assert abs(chern_unit_field.diag['imag_part']) < 1e-6

  def test_field_independent(self):
    """Ch = 1 at b = 0.5."""
    assert chern_zero_mode(0.5, jobs=2).value == pytest.approx(1.0, abs=1e-3)

  def test_agrees_with_streda(self, chern_unit_field):
    """Ch matches 2 pi times the Streda slope of island {0}."""
    _, chern = streda_slope(SpectralIsland((0,)), STREDA_GRID).value
    assert abs(chern_unit_field.value - chern) <= 2e-3

  def test_small_radius_rejected(self):
    """A disk cutting the Gaussian tail is a precondition error."""
    with pytest.raises(PreconditionError, match='quad_radius'):
      chern_zero_mode(1.0, quad_radius=5.0)


class TestBulkEdgeReport:
  """Tests for bulk_edge_report and report_branch_labels."""

  @pytest.mark.parametrize('levels', [(0,), (0, 1)])
  def test_report_passes(self, levels, unit_field_branches):
    """Bulk, edge and Streda agree on N / 2 pi and the flow is N."""
    island = SpectralIsland(levels)
    report = bulk_edge_report(island, 1.0, branches=unit_field_branches)
    n = len(levels)
    assert report.passed
    assert report.bulk_value == pytest.approx(n / TWO_PI, abs=1e-3)
    assert report.edge_value == pytest.approx(n / TWO_PI, abs=1e-3)
    assert report.streda_slope == pytest.approx(n / TWO_PI, abs=1e-9)
    assert report.spectral_flow == n
    assert report.abs_err == pytest.approx(
        abs(report.bulk_value - report.edge_value))

  def test_report_dict_keys(self, unit_field_branches):
    """to_dict carries the documented report keys."""
    report = bulk_edge_report(SpectralIsland((0,)), 1.0,
                              branches=unit_field_branches)
    assert {
        'b', 'island', 'bulk_value', 'edge_value', 'streda_slope',
        'chern_estimate', 'spectral_flow', 'abs_err', 'rel_err', 'pass'
    } <= set(report.to_dict())

  def test_branch_labels(self):
    """Zero island traces -2, -1, 0; an upper island traces 0..hi only."""
    f = make_gap_function(SpectralIsland((0,)), 1.0)
    assert report_branch_labels(SpectralIsland((0,)), f, 1.0) == [-2, -1, 0]
    upper = SpectralIsland((1, 2))
    g = make_gap_function(upper, 1.0)
    assert report_branch_labels(upper, g, 1.0) == [0, 1, 2]
