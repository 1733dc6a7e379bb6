import pytest

from diraclab.domain.types import DispersionBranch
from diraclab.engine.edge_fiber import trace_branches


@pytest.fixture(scope='session')
def unit_field_branches() -> list[DispersionBranch]:
  """Branches k = -1..2 at b = 1 over xi in [-8, 6], shared across modules."""
  return trace_branches(1.0, (-8.0, 6.0, 0.05), (-1, 0, 1, 2), jobs=4)


@pytest.fixture(scope='session')
def unit_field_branch_map(
    unit_field_branches: list[DispersionBranch]
) -> dict[int, DispersionBranch]:
  """The unit-field branches keyed by label."""
  return {branch.k: branch for branch in unit_field_branches}
