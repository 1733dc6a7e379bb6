"""
Domain types for the Dirac-Landau laboratory.

These dataclasses are the typed interfaces between the engine modules, the
verification suites and the CLI. Numerical arrays are numpy arrays; scalars
are plain floats so results serialize cleanly to CSV and JSON.
"""

from collections.abc import Callable
from dataclasses import dataclass
from dataclasses import field
import math
from typing import Any, Generic, Literal, Optional, TypeVar

import numpy as np

_T = TypeVar('_T')


@dataclass
class ComputeOutput(Generic[_T]):
  """
  Standard output from a pluggable backend.

  Attributes:
    value: The computed value (type depends on backend)
    diag: Dictionary of diagnostic information
  """
  value: _T
  diag: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class EvalResult:
  """
  Scalar special-function value with an absolute error estimate.

  Attributes:
    value: Function value
    abs_error_estimate: Estimated absolute error (same units as value)
  """
  value: float
  abs_error_estimate: float

  def __post_init__(self):
    if not math.isfinite(self.value):
      raise ValueError(f'EvalResult.value must be finite, got {self.value}')
    if not self.abs_error_estimate >= 0:
      raise ValueError('EvalResult.abs_error_estimate must be >= 0, '
                       f'got {self.abs_error_estimate}')

  def __float__(self) -> float:
    return self.value


@dataclass(frozen=True)
class PlanePoint:
  """Point (x1, x2) of the plane."""
  x1: float
  x2: float

  def __post_init__(self):
    if not (math.isfinite(self.x1) and math.isfinite(self.x2)):
      raise ValueError(f'PlanePoint components must be finite: {self}')

  def as_array(self) -> np.ndarray:
    """Return the point as a length-2 float array."""
    return np.array([self.x1, self.x2], dtype=float)

  def reflected(self) -> 'PlanePoint':
    """Mirror image across the edge x2 = 0."""
    return PlanePoint(self.x1, -self.x2)

  def distance(self, other: 'PlanePoint') -> float:
    """Euclidean distance to another point."""
    return math.hypot(self.x1 - other.x1, self.x2 - other.x2)


@dataclass(frozen=True)
class HalfPlanePoint(PlanePoint):
  """Point of the closed half-plane E = {x2 >= 0}."""

  def __post_init__(self):
    super().__post_init__()
    if self.x2 < 0:
      raise ValueError(f'HalfPlanePoint needs x2 >= 0, got x2={self.x2}')


@dataclass(frozen=True, eq=False)
class SpinorMatrix:
  """
  2x2 complex matrix acting on C^2 spinors.

  Used for Pauli matrices and for the values of the integral kernels.
  """
  entries: np.ndarray

  def __post_init__(self):
    arr = np.array(self.entries, dtype=complex)
    if arr.shape != (2, 2):
      raise ValueError(f'SpinorMatrix needs shape (2, 2), got {arr.shape}')
    if not np.all(np.isfinite(arr)):
      raise ValueError('SpinorMatrix entries must be finite')
    arr.setflags(write=False)
    object.__setattr__(self, 'entries', arr)

  @classmethod
  def identity(cls) -> 'SpinorMatrix':
    return cls(np.eye(2))

  def __matmul__(self, other: 'SpinorMatrix') -> 'SpinorMatrix':
    return SpinorMatrix(self.entries @ other.entries)

  def __add__(self, other: 'SpinorMatrix') -> 'SpinorMatrix':
    return SpinorMatrix(self.entries + other.entries)

  def __sub__(self, other: 'SpinorMatrix') -> 'SpinorMatrix':
    return SpinorMatrix(self.entries - other.entries)

  def scaled(self, factor: complex) -> 'SpinorMatrix':
    """Return factor * self."""
    return SpinorMatrix(factor * self.entries)

  def norm(self) -> float:
    """Spectral norm (largest singular value)."""
    return float(np.linalg.norm(self.entries, 2))

  def frobenius(self) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(self.entries))

  def trace(self) -> complex:
    return complex(np.trace(self.entries))

  def allclose(self, other: 'SpinorMatrix', atol: float = 1e-12) -> bool:
    return bool(np.allclose(self.entries, other.entries, rtol=0, atol=atol))


SIGMA_1 = SpinorMatrix(np.array([[0, 1], [1, 0]]))
SIGMA_2 = SpinorMatrix(np.array([[0, -1j], [1j, 0]]))
SIGMA_3 = SpinorMatrix(np.array([[1, 0], [0, -1]]))
IDENTITY = SpinorMatrix.identity()


def pauli(i: int) -> SpinorMatrix:
  """Return the Pauli matrix sigma_i for i in {1, 2, 3} (0 gives I2)."""
  table = {0: IDENTITY, 1: SIGMA_1, 2: SIGMA_2, 3: SIGMA_3}
  try:
    return table[i]
  except KeyError as e:
    raise KeyError(f'Unknown Pauli index: {i}. Available: [0, 1, 2, 3]') from e


@dataclass(frozen=True)
class SpectralParameter:
  """Spectral parameter sqrt(lambda) > 0 of the resolvent at i*sqrt(lambda)."""
  sqrt_lambda: float

  def __post_init__(self):
    if not (math.isfinite(self.sqrt_lambda) and self.sqrt_lambda > 0):
      raise ValueError(
          f'sqrt_lambda must be positive and finite, got {self.sqrt_lambda}')

  @property
  def lam(self) -> float:
    return self.sqrt_lambda**2


@dataclass(frozen=True)
class FiberProblem:
  """
  Edge fiber operator h(xi) = -i d/dx sigma2 + (b x + xi) sigma1 on [0, inf).

  Attributes:
    b: Magnetic field strength (> 0)
    xi: Fiber momentum along the edge
  """
  b: float
  xi: float

  def __post_init__(self):
    if not (math.isfinite(self.b) and self.b > 0):
      raise ValueError(f'FiberProblem.b must be positive, got {self.b}')
    if not math.isfinite(self.xi):
      raise ValueError(f'FiberProblem.xi must be finite, got {self.xi}')


@dataclass(frozen=True)
class GridSpec:
  """
  Half-line discretization for the grid backend.

  The box [0, x_max] carries a hard wall psi2(x_max) = 0. The only scheme is
  the staggered first-order one; the supersymmetric second-order reduction is
  what the secular backend solves in closed form.

  Attributes:
    x_max: Box length
    n: Number of cells of the coarsest grid (even, >= 64)
    scheme: Discretization tag
  """
  x_max: float
  n: int = 1024
  scheme: Literal['staggered'] = 'staggered'

  def __post_init__(self):
    if not (math.isfinite(self.x_max) and self.x_max > 0):
      raise ValueError(f'GridSpec.x_max must be positive, got {self.x_max}')
    if self.n < 64 or self.n % 2:
      raise ValueError(f'GridSpec.n must be even and >= 64, got {self.n}')
    if self.scheme != 'staggered':
      raise ValueError(f"Unknown scheme: '{self.scheme}'. "
                       "Available: ['staggered']")

  @staticmethod
  def required_x_max(problem: FiberProblem, lambda_max: float) -> float:
    """Turning point of the largest level plus a 6/sqrt(b) decay margin."""
    b = problem.b
    return ((abs(problem.xi) + 2.0 * math.sqrt(lambda_max**2 + b)) / b +
            6.0 / math.sqrt(b))

  @classmethod
  def for_problem(
      cls,
      problem: FiberProblem,
      lambda_max: float,
      n: int = 1024,
  ) -> 'GridSpec':
    """Smallest box satisfying the decay margin for levels up to lambda_max."""
    return cls(x_max=cls.required_x_max(problem, lambda_max), n=n)

  def covers(self, problem: FiberProblem, lambda_max: float) -> bool:
    return self.x_max >= self.required_x_max(problem, lambda_max)


@dataclass(frozen=True, eq=False)
class EdgeEigenpair:
  """
  Solved eigenvalue of a fiber problem with its sampled eigenfunction.

  psi1 lives on the nodes x including both ends, psi2 on the half
  nodes x_half. Both are real.

  Attributes:
    problem: The fiber problem solved
    lam: Eigenvalue (Richardson-extrapolated)
    x: Node coordinates
    psi1: First spinor component on the nodes
    x_half: Half-node coordinates
    psi2: Second spinor component on the half nodes
    bc_residual: |psi1(0) - psi2(0)|
    ode_residual: Relative L2 residual of the fiber ODE (continuum)
    norm: Discrete L2 norm of (psi1, psi2)
    velocity_coarse: Hellmann-Feynman velocity on the next coarser grid
    diag: Solver diagnostics
  """
  problem: FiberProblem
  lam: float
  x: np.ndarray
  psi1: np.ndarray
  x_half: np.ndarray
  psi2: np.ndarray
  bc_residual: float
  ode_residual: float
  norm: float
  velocity_coarse: Optional[float] = None
  diag: dict[str, Any] = field(default_factory=dict)

  def invariant_violations(
      self,
      norm_tol: float = 1e-10,
      bc_tol: float = 1e-8,
      ode_tol: float = 1e-6,
  ) -> list[str]:
    """
    Check the eigenpair invariants.

    Returns:
      List of violation messages (empty if all hold)
    """
    errors = []
    if abs(self.norm - 1.0) > norm_tol:
      errors.append(f'norm {self.norm:.3e} differs from 1 by > {norm_tol}')
    if self.bc_residual > bc_tol:
      errors.append(f'bc_residual {self.bc_residual:.3e} > {bc_tol}')
    if self.ode_residual > ode_tol:
      errors.append(f'ode_residual {self.ode_residual:.3e} > {ode_tol}')
    return errors


@dataclass(frozen=True)
class BranchSample:
  """One point (xi, lambda, velocity) on a dispersion branch with residuals."""
  xi: float
  lam: float
  velocity: float
  bc_residual: float = 0.0
  ode_residual: float = 0.0


@dataclass
class DispersionBranch:
  """
  Edge band lambda_k(xi) traced by continuity.

  Attributes:
    k: Branch label; sign is the energy sign, |k| the bulk level reached
       as xi -> -inf
    b: Magnetic field strength
    samples: Samples ordered strictly in xi
  """
  k: int
  b: float
  samples: list[BranchSample] = field(default_factory=list)

  def __post_init__(self):
    xs = [s.xi for s in self.samples]
    if any(b <= a for a, b in zip(xs, xs[1:])):
      raise ValueError(f'Branch {self.k} samples must be strictly '
                       'increasing in xi')
    if not all(math.isfinite(s.velocity) for s in self.samples):
      raise ValueError(f'Branch {self.k} has non-finite velocities')

  @property
  def xi(self) -> np.ndarray:
    return np.array([s.xi for s in self.samples])

  @property
  def lam(self) -> np.ndarray:
    return np.array([s.lam for s in self.samples])

  @property
  def velocity(self) -> np.ndarray:
    return np.array([s.velocity for s in self.samples])

  @property
  def asymptote(self) -> float:
    """Bulk level sgn(k) sqrt(2|k|b) approached as xi -> -inf."""
    return math.copysign(math.sqrt(2.0 * abs(self.k) * self.b), self.k)


@dataclass(frozen=True)
class SpectralIsland:
  """
  Contiguous set of Dirac-Landau level indices.

  Level k has energy sgn(k) sqrt(2|k|b).
  """
  levels: tuple[int, ...]

  def __post_init__(self):
    levels = tuple(sorted(int(k) for k in self.levels))
    if not levels:
      raise ValueError('SpectralIsland needs at least one level')
    if levels != tuple(range(levels[0], levels[-1] + 1)):
      raise ValueError(f'SpectralIsland levels must be contiguous: {levels}')
    object.__setattr__(self, 'levels', levels)

  @classmethod
  def from_range(cls, lo: int, hi: int) -> 'SpectralIsland':
    return cls(tuple(range(lo, hi + 1)))

  @property
  def N(self) -> int:  # pylint: disable=invalid-name
    return len(self.levels)

  @property
  def lo(self) -> int:
    return self.levels[0]

  @property
  def hi(self) -> int:
    return self.levels[-1]

  def energies(self, b: float) -> np.ndarray:
    return np.array([level_energy(k, b) for k in self.levels])


def level_energy(k: int, b: float) -> float:
  """Energy sgn(k) sqrt(2|k|b) of the Dirac-Landau level k."""
  return math.copysign(math.sqrt(2.0 * abs(k) * b), k) if k else 0.0


@dataclass(frozen=True)
class Region:
  """
  Integration region in the plane.

  kinds:
    unit_cell: Omega = [0,1]^2
    strip: S_L = [0,1] x [0,L]
    semi_infinite_strip: [0,1] x [0,inf), the support of chi_inf
  """
  kind: Literal['unit_cell', 'strip', 'semi_infinite_strip'] = 'unit_cell'
  L: Optional[float] = None  # pylint: disable=invalid-name

  def __post_init__(self):
    if self.kind not in ('unit_cell', 'strip', 'semi_infinite_strip'):
      raise ValueError(f"Unknown region kind: '{self.kind}'")
    if self.kind == 'strip' and (self.L is None or self.L < 1):
      raise ValueError(f'Strip region needs L >= 1, got {self.L}')

  def bounds(self) -> tuple[tuple[float, float], tuple[float, float]]:
    """((x1_lo, x1_hi), (x2_lo, x2_hi))."""
    if self.kind == 'unit_cell':
      return (0.0, 1.0), (0.0, 1.0)
    if self.kind == 'strip':
      assert self.L is not None
      return (0.0, 1.0), (0.0, float(self.L))
    return (0.0, 1.0), (0.0, math.inf)

  @property
  def area(self) -> float:
    (a, b), (c, d) = self.bounds()
    return (b - a) * (d - c)


KernelFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProjectionKernel:
  """
  Integral kernel of a spectral projection.

  Attributes:
    b: Magnetic field strength
    kernel: Vectorized kernel; arrays of points (..., 2) and (..., 2) to
            matrices (..., 2, 2)
    diag: Construction diagnostics (invariant residuals)
  """
  b: float
  kernel: KernelFn
  diag: dict[str, Any] = field(default_factory=dict)

  def eval(self, x: PlanePoint, xp: PlanePoint) -> SpinorMatrix:
    return SpinorMatrix(self.kernel(x.as_array(), xp.as_array()))


@dataclass
class CorrespondenceReport:
  """
  Bulk-edge verification report for one island at one field strength.

  Attributes:
    b: Magnetic field strength
    island: Landau level indices
    bulk_value: dB_f/db from the bulk formula
    edge_value: Edge current trace from the traced branches
    streda_slope: Least-squares slope of the IDS over the b stencil
    chern_estimate: 2 pi * streda_slope
    spectral_flow: Net edge crossings of the island's gaps
    abs_err: |bulk_value - edge_value|
    rel_err: abs_err / |bulk_value|
    tolerances: Tolerances used for the pass flag
    diagnostics: Branch and quadrature diagnostics
    passed: True if every comparison is within tolerance
  """
  b: float
  island: tuple[int, ...]
  bulk_value: float
  edge_value: float
  streda_slope: float
  chern_estimate: float
  spectral_flow: int
  abs_err: float
  rel_err: float
  tolerances: dict[str, float] = field(default_factory=dict)
  diagnostics: dict[str, Any] = field(default_factory=dict)
  passed: bool = False

  def __post_init__(self):
    if not math.isclose(self.abs_err,
                        abs(self.bulk_value - self.edge_value),
                        rel_tol=1e-12,
                        abs_tol=1e-15):
      raise ValueError('abs_err must equal |bulk_value - edge_value|')

  def to_dict(self) -> dict[str, Any]:
    """JSON-friendly dictionary with the documented report keys."""
    return {
        'b': self.b,
        'island': list(self.island),
        'bulk_value': self.bulk_value,
        'edge_value': self.edge_value,
        'streda_slope': self.streda_slope,
        'chern_estimate': self.chern_estimate,
        'spectral_flow': self.spectral_flow,
        'abs_err': self.abs_err,
        'rel_err': self.rel_err,
        'pass': self.passed,
        'tolerances': dict(self.tolerances),
        'diagnostics': dict(self.diagnostics),
    }
