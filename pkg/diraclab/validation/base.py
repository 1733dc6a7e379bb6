"""Check results for the verification suites."""
from dataclasses import dataclass
import math


@dataclass(frozen=True)
class CheckResult:
  """Result of a single verification check."""

  name: str
  ok: bool
  details: str

  def __str__(self) -> str:
    status = '✓' if self.ok else '✗'
    return f'{status} {self.name}: {self.details}'


def pass_result(name: str, details: str) -> CheckResult:
  """Create a passing CheckResult."""
  return CheckResult(name=name, ok=True, details=details)


def fail_result(name: str, details: str) -> CheckResult:
  """Create a failing CheckResult."""
  return CheckResult(name=name, ok=False, details=details)


def tolerance_result(name: str, error: float, tol: float,
                     what: str = 'error') -> CheckResult:
  """
  Pass iff a non-negative error is finite and within tol.

  Args:
    name: Check name
    error: Achieved error (NaN counts as a failure)
    tol: Tolerance
    what: Label of the error in the details text

  Returns:
    CheckResult with the error and tolerance in the details
  """
  ok = math.isfinite(error) and error <= tol
  return CheckResult(name=name,
                     ok=ok,
                     details=f'{what} {error:.3e} (tol {tol:.1e})')


def worst(name: str, results: list[CheckResult]) -> CheckResult:
  """Collapse per-sample results into one; fails with the first failure."""
  failed = [r for r in results if not r.ok]
  if failed:
    return fail_result(
        name, f'{len(failed)}/{len(results)} samples failed; '
        f'first: {failed[0].details}')
  return pass_result(name, f'all {len(results)} samples pass')
