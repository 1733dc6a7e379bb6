"""Order-preserving parallel map over independent work items."""

from collections.abc import Callable, Sequence
from concurrent.futures import as_completed
from concurrent.futures import ThreadPoolExecutor
import logging
import os
from typing import Optional, TypeVar

logger = logging.getLogger(__name__)

_In = TypeVar('_In')
_Out = TypeVar('_Out')

JOBS_ENV_VAR = 'DLL_JOBS'


def resolve_jobs(jobs: Optional[int] = None) -> int:
  """
  Worker count from the explicit value, else DLL_JOBS, else 1.

  Raises:
    ValueError: If the resulting count is not a positive integer
  """
  if jobs is None:
    raw = os.environ.get(JOBS_ENV_VAR, '1')
    try:
      jobs = int(raw)
    except ValueError as e:
      raise ValueError(f'{JOBS_ENV_VAR} must be an integer, got {raw!r}') from e
  if jobs < 1:
    raise ValueError(f'jobs must be >= 1, got {jobs}')
  return jobs


def ordered_map(
    fn: Callable[[_In], _Out],
    items: Sequence[_In],
    jobs: int = 1,
) -> list[_Out]:
  """
  Apply fn to every item, returning results in input order.

  With jobs == 1 the items are processed serially without an executor.
  Otherwise results are collected by index, so the output does not depend on
  the worker count. The first exception raised by fn propagates.
  """
  if jobs <= 1 or len(items) <= 1:
    return [fn(item) for item in items]

  results: dict[int, _Out] = {}
  with ThreadPoolExecutor(max_workers=jobs) as executor:
    futures = {executor.submit(fn, item): i for i, item in enumerate(items)}
    for future in as_completed(futures):
      results[futures[future]] = future.result()
  logger.debug('ordered_map finished %d items on %d workers', len(items), jobs)
  return [results[i] for i in range(len(items))]
