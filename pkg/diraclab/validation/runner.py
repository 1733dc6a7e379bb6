"""
Verification runner with reporting.

Runs registered checks in order and reports them in a fixed layout.

Two kinds of registrations:
- checks: acceptance invariants; any failure fails the run
- warnings: informational (calibration constants, timings); never fail it
"""
from dataclasses import dataclass
import logging
import time
from typing import Any, Callable, Union

from diraclab.validation.base import CheckResult

logger = logging.getLogger(__name__)

CheckFn = Callable[..., Union[CheckResult, list[CheckResult]]]


@dataclass
class _RegisteredCheck:
  """Internal representation of a registered check."""

  check_id: str
  check_fn: CheckFn
  args: tuple[Any, ...]
  kwargs: dict[str, Any]
  is_warning: bool


@dataclass
class ValidationResult:
  """Result of a check with its kind and wall time."""

  result: CheckResult
  is_warning: bool
  seconds: float = 0.0


class ValidationRunner:
  """
  Run verification checks for one suite and report results.

  Usage:
    runner = ValidationRunner('specfun')
    runner.add_check('k0_at_one', check_k0_at_one)
    runner.add_warning('decay_constant', report_decay_constant)
    ok = runner.run()
    runner.print_summary()
  """

  def __init__(self, suite_name: str):
    self.suite_name = suite_name
    self._registered: list[_RegisteredCheck] = []
    self.results: list[ValidationResult] = []

  def add_check(
      self,
      check_id: str,
      check_fn: CheckFn,
      *args: Any,
      **kwargs: Any,
  ) -> None:
    """
    Register a check that must pass.

    Args:
      check_id: Identifier used if check_fn raises
      check_fn: Function returning CheckResult or list[CheckResult]
      *args: Positional arguments for check_fn
      **kwargs: Keyword arguments for check_fn
    """
    self._registered.append(
        _RegisteredCheck(check_id, check_fn, args, kwargs, is_warning=False))

  def add_warning(
      self,
      check_id: str,
      check_fn: CheckFn,
      *args: Any,
      **kwargs: Any,
  ) -> None:
    """Register an informational check; its failure does not fail the run."""
    self._registered.append(
        _RegisteredCheck(check_id, check_fn, args, kwargs, is_warning=True))

  def extend(self, other: 'ValidationRunner') -> None:
    """Append the registrations of another runner."""
    self._registered.extend(other._registered)  # pylint: disable=W0212

  @property
  def check_ids(self) -> list[str]:
    return [reg.check_id for reg in self._registered]

  def run(self) -> bool:
    """
    Execute all registered checks in registration order.

    An exception raised by a check becomes a failed CheckResult naming the
    exception type.

    Returns:
      True if all checks (not warnings) pass
    """
    self.results = []

    for reg in self._registered:
      logger.debug('Running %s/%s', self.suite_name, reg.check_id)
      start = time.perf_counter()
      try:
        outcome = reg.check_fn(*reg.args, **reg.kwargs)
        found = outcome if isinstance(outcome, list) else [outcome]
      except Exception as e:  # pylint: disable=broad-except
        found = [
            CheckResult(name=reg.check_id,
                        ok=False,
                        details=f'Exception: {type(e).__name__}: {e}')
        ]
      elapsed = time.perf_counter() - start
      for r in found:
        self.results.append(ValidationResult(r, reg.is_warning, elapsed))

    return self.all_passed

  def print_summary(self, verbose: bool = False) -> None:
    """
    Print the summary to stdout.

    Args:
      verbose: Also print details of passing checks
    """
    checks = [r for r in self.results if not r.is_warning]
    warnings = [r for r in self.results if r.is_warning]
    checks_passed = sum(1 for r in checks if r.result.ok)
    checks_failed = len(checks) - checks_passed
    warnings_ok = sum(1 for r in warnings if r.result.ok)

    print()
    print('=' * 70)
    print(f'=== {self.suite_name} Verification Summary ===')
    print('=' * 70)

    if checks:
      print('--- Checks (must pass) ---')
      for vr in checks:
        status = '✓ OK  ' if vr.result.ok else '✗ FAIL'
        print(f'{status} {vr.result.name}')
        if not vr.result.ok or verbose:
          print(f'       {vr.result.details}')

    if warnings:
      print('--- Warnings (informational) ---')
      for vr in warnings:
        status = '✓ OK  ' if vr.result.ok else '⚠ WARN'
        print(f'{status} {vr.result.name}')
        print(f'       {vr.result.details}')

    print('=' * 70)
    print(f'Checks: {checks_passed}/{len(checks)} passed', end='')
    print(f' ({checks_failed} FAILED)' if checks_failed else '')
    if warnings:
      issues = len(warnings) - warnings_ok
      print(f'Warnings: {warnings_ok}/{len(warnings)} OK', end='')
      print(f' ({issues} issues)' if issues else '')
    print('=' * 70)

  def log_summary(self) -> None:
    """Log the summary; failures at ERROR, warning issues at WARNING."""
    checks = [r for r in self.results if not r.is_warning]
    checks_passed = sum(1 for r in checks if r.result.ok)

    logger.info('%s verification: %d/%d checks passed', self.suite_name,
                checks_passed, len(checks))
    for vr in self.results:
      if vr.is_warning:
        status = '✓' if vr.result.ok else '⚠'
        level = logging.INFO if vr.result.ok else logging.WARNING
      else:
        status = '✓' if vr.result.ok else '✗'
        level = logging.INFO if vr.result.ok else logging.ERROR
      logger.log(level, '%s %s: %s (%.2fs)', status, vr.result.name,
                 vr.result.details, vr.seconds)

    if checks_passed < len(checks):
      logger.error('%d checks FAILED', len(checks) - checks_passed)

  @property
  def all_passed(self) -> bool:
    """True if all checks (not warnings) passed."""
    return all(r.result.ok for r in self.results if not r.is_warning)

  @property
  def failed_checks(self) -> list[CheckResult]:
    return [
        r.result for r in self.results if not r.is_warning and not r.result.ok
    ]

  @property
  def warning_issues(self) -> list[CheckResult]:
    return [r.result for r in self.results if r.is_warning and not r.result.ok]
