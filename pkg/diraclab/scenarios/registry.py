"""
Registries mapping string names to test functions and fiber backends.

Run configurations name families by string (JSON friendly); these tables turn
the names into instances.
"""

from collections.abc import Callable
from typing import Any

from diraclab.domain.types import SpectralIsland
from diraclab.engine.edge_fiber import FiberBackend
from diraclab.engine.edge_fiber import GridBackend
from diraclab.engine.edge_fiber import SecularBackend
from diraclab.engine.funcalc import DEFAULT_MARGIN
from diraclab.engine.funcalc import make_gap_function
from diraclab.functions.base import TestFunction
from diraclab.functions.gaussian import GaussianFunction
from diraclab.functions.zero import ZeroFunction
from diraclab.scenarios.config import RunConfig


def _gap(island: tuple[int, ...] = (0,),
         b: float = 1.0,
         margin: float = DEFAULT_MARGIN) -> TestFunction:
  return make_gap_function(SpectralIsland(tuple(island)), b, margin)


TEST_FUNCTIONS: dict[str, Callable[..., TestFunction]] = {
    'gaussian': GaussianFunction,
    'zero': ZeroFunction,
    'gap': _gap,
}

FIBER_BACKENDS: dict[str, Callable[..., FiberBackend]] = {
    'grid': GridBackend,
    'secular': SecularBackend,
}

REGISTRY = {
    'test_functions': TEST_FUNCTIONS,
    'fiber_backends': FIBER_BACKENDS,
}


def create_test_function(name: str, **kwargs: Any) -> TestFunction:
  """
  Instantiate a test function by name.

  Args:
    name: Registry name
    **kwargs: Family parameters (island, b, margin for 'gap')

  Raises:
    KeyError: If the name is not registered
  """
  try:
    factory = TEST_FUNCTIONS[name]
  except KeyError as e:
    raise KeyError(f"Unknown test function: '{name}'. "
                   f'Available: {list(TEST_FUNCTIONS.keys())}') from e
  return factory(**kwargs)


def get_backend(name: str, **kwargs: Any) -> FiberBackend:
  """
  Instantiate a fiber backend by name.

  Raises:
    KeyError: If the name is not registered
  """
  try:
    factory = FIBER_BACKENDS[name]
  except KeyError as e:
    raise KeyError(f"Unknown fiber backend: '{name}'. "
                   f'Available: {list(FIBER_BACKENDS.keys())}') from e
  return factory(**kwargs)


def function_for(config: RunConfig) -> TestFunction:
  """The configured test function; gap functions use island, b and margin."""
  if config.function == 'gap':
    return create_test_function('gap',
                                island=config.island,
                                b=config.b,
                                margin=config.margin)
  return create_test_function(config.function)


def backend_for(config: RunConfig) -> FiberBackend:
  if config.backend == 'grid':
    return get_backend('grid', grid_n=config.grid_n)
  return get_backend(config.backend)


def list_registry() -> dict[str, list[str]]:
  """List all registered names by category."""
  return {category: list(table.keys()) for category, table in REGISTRY.items()}
