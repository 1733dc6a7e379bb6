"""
Run configuration for the command-line front end.

RunConfig is a JSON-friendly dataclass holding every numeric parameter a
subcommand accepts. Defaults mirror the acceptance tolerances; validate()
checks the parameters against the engine preconditions before dispatch.
"""

from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import fields
import json
import math
from typing import Any, Optional

from diraclab.domain.errors import DomainError
from diraclab.domain.types import SpectralIsland

_TUPLE_FIELDS = ('island', 'k_set', 'xi_range')


@dataclass
class RunConfig:
  """
  Parameters of one diraclab run.

  Attributes:
    b: Magnetic field strength
    island: Landau indices of the spectral island
    k_set: Branch labels to trace
    k_max: Level cutoff for spectra and ladders
    xi_range: (start, stop, step) of the xi sweep
    backend: Fiber backend name
    grid_n: Base grid cell count
    jobs: Worker threads; None defers to DLL_JOBS
    margin: Gap-function margin in (0, 1/2)
    N: Almost-analytic extension order
    quad_radius: Chern quadrature radius; None for 10 / sqrt(b)
    sqrt_lambda: Spectral parameter of the kernels
    samples: Target points of a kernel table
    kernel: Kernel id for kernel tables
    function: Test-function name
    suite: Verification suite
    tol_bulk_edge: Relative bulk vs edge tolerance
    tol_chern: Chern character tolerance
    tol_backend: Grid vs secular tolerance
    tol_streda: Streda Chern estimate tolerance
    output: Output path; None for stdout
    format: csv or json
  """
  b: float = 1.0
  island: tuple[int, ...] = (0,)
  k_set: tuple[int, ...] = (-1, 0, 1, 2)
  k_max: int = 3
  xi_range: tuple[float, float, float] = (-8.0, 6.0, 0.05)
  backend: str = 'grid'
  grid_n: int = 1024
  jobs: Optional[int] = None
  margin: float = 0.25
  N: int = 3  # pylint: disable=invalid-name
  quad_radius: Optional[float] = None
  sqrt_lambda: float = 1.0
  samples: int = 200
  kernel: str = 'free'
  function: str = 'gap'
  suite: str = 'all'
  tol_bulk_edge: float = 1e-3
  tol_chern: float = 1e-3
  tol_backend: float = 1e-6
  tol_streda: float = 1e-9
  output: Optional[str] = None
  format: str = 'csv'

  @classmethod
  def default(cls) -> 'RunConfig':
    """Create default run configuration."""
    return cls()

  def to_dict(self) -> dict[str, Any]:
    """Convert to dictionary; tuples become lists."""
    data = asdict(self)
    for name in _TUPLE_FIELDS:
      data[name] = list(data[name])
    return data

  def to_json(self) -> str:
    """Serialize to JSON string."""
    return json.dumps(self.to_dict(), indent=2, sort_keys=True)

  @classmethod
  def from_dict(cls, data: dict[str, Any]) -> 'RunConfig':
    """
    Create from dictionary.

    Unknown keys are ignored; list values of tuple fields become tuples.
    """
    known_fields = {f.name for f in fields(cls)}
    filtered = {k: v for k, v in data.items() if k in known_fields}
    for name in _TUPLE_FIELDS:
      if name in filtered:
        filtered[name] = tuple(filtered[name])
    return cls(**filtered)

  @classmethod
  def from_json(cls, json_str: str) -> 'RunConfig':
    """Create from JSON string."""
    return cls.from_dict(json.loads(json_str))

  def spectral_island(self) -> SpectralIsland:
    try:
      return SpectralIsland(self.island)
    except ValueError as e:
      raise DomainError(str(e)) from e

  def validate(self) -> None:
    """
    Check parameters against the engine preconditions.

    Raises:
      DomainError: Naming the first offending field
    """
    if not (math.isfinite(self.b) and self.b > 0):
      raise DomainError(f'b must be positive, got {self.b}')
    self.spectral_island()
    if not self.k_set:
      raise DomainError('k_set must not be empty')
    if len(set(self.k_set)) != len(self.k_set):
      raise DomainError(f'k_set has duplicate labels: {self.k_set}')
    if self.k_max < 0:
      raise DomainError(f'k_max must be >= 0, got {self.k_max}')
    if len(self.xi_range) != 3:
      raise DomainError(f'xi_range must be (start, stop, step), got '
                        f'{self.xi_range}')
    start, stop, step = self.xi_range
    if not (step > 0 and start < stop):
      raise DomainError(f'xi_range needs start < stop and step > 0, got '
                        f'{self.xi_range}')
    if self.grid_n < 64 or self.grid_n % 2:
      raise DomainError(f'grid_n must be even and >= 64, got {self.grid_n}')
    if self.jobs is not None and self.jobs < 1:
      raise DomainError(f'jobs must be >= 1, got {self.jobs}')
    if not 0 < self.margin < 0.5:
      raise DomainError(f'margin must be in (0, 1/2), got {self.margin}')
    if self.N < 3:
      raise DomainError(f'N must be >= 3, got {self.N}')
    if self.quad_radius is not None and not self.quad_radius > 0:
      raise DomainError(f'quad_radius must be positive, got '
                        f'{self.quad_radius}')
    if not (math.isfinite(self.sqrt_lambda) and self.sqrt_lambda > 0):
      raise DomainError(f'sqrt_lambda must be positive, got '
                        f'{self.sqrt_lambda}')
    if self.samples < 1:
      raise DomainError(f'samples must be >= 1, got {self.samples}')
    if self.format not in ('csv', 'json'):
      raise DomainError(f"format must be 'csv' or 'json', got "
                        f"'{self.format}'")
    for name in ('tol_bulk_edge', 'tol_chern', 'tol_backend', 'tol_streda'):
      if not getattr(self, name) > 0:
        raise DomainError(f'{name} must be positive, got '
                          f'{getattr(self, name)}')

  def tolerances(self) -> dict[str, float]:
    return {
        'bulk_edge': self.tol_bulk_edge,
        'chern': self.tol_chern,
        'backend': self.tol_backend,
        'streda': self.tol_streda,
    }

  def overridden(self, other: 'RunConfig') -> list[str]:
    """Names of the fields whose values differ from other."""
    return sorted(f.name
                  for f in fields(self)
                  if getattr(self, f.name) != getattr(other, f.name))
