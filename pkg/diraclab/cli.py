"""
Command-line front end.

Subcommands:
  spectrum     Bulk Landau levels (CSV)
  dispersion   Edge dispersion branches (CSV)
  edge-trace   Bulk-edge correspondence report for an island (JSON)
  streda       IDS slope and Chern estimate of an island (JSON)
  kernel       Kernel entries along a line of targets (CSV)
  chern        Chern character of the zero-mode projection (JSON)
  edge-gap     Spectral gap of the half-plane operator below 0 (JSON)
  verify       Invariant suites; exit 0 iff every check passes

Exit codes: 0 success, 1 failed verification or pass flag, 2 usage error,
3 numerical accuracy error.

Examples:
  diraclab spectrum --b 1 --kmax 3
  diraclab dispersion --b 1 --xi -8:6:0.05 --k -1..2 --output out/disp.csv
  diraclab edge-trace --b 1 --island 0 --jobs 4
  diraclab verify --suite all
"""

import argparse
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from dataclasses import fields
from dataclasses import replace
import logging
import math
from pathlib import Path
import sys
from typing import Any, Optional

import numpy as np
import pandas as pd

from diraclab.domain.errors import AccuracyError
from diraclab.domain.types import FiberProblem
from diraclab.domain.types import PlanePoint
from diraclab.domain.types import SpectralParameter
from diraclab.engine.correspondence import bulk_edge_report
from diraclab.engine.correspondence import chern_zero_mode
from diraclab.engine.correspondence import spectrum_table
from diraclab.engine.correspondence import streda_slope
from diraclab.engine.edge_fiber import dispersion_table
from diraclab.engine.edge_fiber import fiber_eigenvalues
from diraclab.engine.edge_fiber import locate_edge_gap
from diraclab.engine.edge_fiber import trace_branches
from diraclab.engine.kernels import KERNEL_IDS
from diraclab.engine.kernels import kernel_table
from diraclab.scenarios.config import RunConfig
from diraclab.scenarios.registry import backend_for
from diraclab.scenarios.registry import FIBER_BACKENDS
from diraclab.shared.io import CsvWriter
from diraclab.shared.io import JsonWriter
from diraclab.shared.parallel import resolve_jobs
from diraclab.shared.schemas import CHERN_KEYS
from diraclab.shared.schemas import DISPERSION_SCHEMA
from diraclab.shared.schemas import EDGE_GAP_KEYS
from diraclab.shared.schemas import JsonSchema
from diraclab.shared.schemas import KERNEL_SCHEMA
from diraclab.shared.schemas import REPORT_KEYS
from diraclab.shared.schemas import SPECTRUM_SCHEMA
from diraclab.shared.schemas import STREDA_KEYS
from diraclab.shared.schemas import TABLE_KEYS
from diraclab.shared.schemas import TableSchema
from diraclab.shared.schemas import VERIFY_KEYS
from diraclab.validation.suites import build_suite
from diraclab.validation.suites import SUITES

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_ACCURACY = 3

STREDA_GRID = (0.8, 0.9, 1.0, 1.1, 1.2)
KERNEL_SOURCE = (0.0, 0.5)
KERNEL_TARGET_HEIGHT = 1.5
KERNEL_HALF_WIDTH = 5.0

# Flags whose values may start with '-' (negative ranges and labels).
_SIGNED_VALUE_FLAGS = ('--xi', '--k', '--island')

# Fields that steer execution only and never reach an output file.
_RUNTIME_FIELDS = ('jobs',)


def parse_range(text: str) -> tuple[float, float, float]:
  """Parse 'start:stop:step' into floats."""
  parts = text.split(':')
  if len(parts) != 3:
    raise argparse.ArgumentTypeError(
        f"expected start:stop:step, got '{text}'")
  try:
    start, stop, step = (float(p) for p in parts)
  except ValueError as e:
    raise argparse.ArgumentTypeError(f"non-numeric range '{text}'") from e
  return (start, stop, step)


def parse_labels(text: str) -> tuple[int, ...]:
  """
  Parse branch or level labels: '0,1,2', '-2..3' or a mix '-3..-1,2'.

  Ranges are inclusive; the result keeps first-seen order without duplicates.
  """
  labels: list[int] = []
  try:
    for part in text.split(','):
      part = part.strip()
      if '..' in part:
        lo, hi = part.split('..')
        labels.extend(range(int(lo), int(hi) + 1))
      else:
        labels.append(int(part))
  except ValueError as e:
    raise argparse.ArgumentTypeError(f"bad label list '{text}'") from e
  if not labels:
    raise argparse.ArgumentTypeError(f"empty label list '{text}'")
  return tuple(dict.fromkeys(labels))


def _join_signed_values(argv: Sequence[str]) -> list[str]:
  """Rewrite '--xi -8:6:0.05' as '--xi=-8:6:0.05' so argparse accepts it."""
  out: list[str] = []
  it = iter(argv)
  for token in it:
    if token in _SIGNED_VALUE_FLAGS:
      value = next(it, None)
      if value is None:
        out.append(token)
      else:
        out.append(f'{token}={value}')
    else:
      out.append(token)
  return out


def _common_parser() -> argparse.ArgumentParser:
  common = argparse.ArgumentParser(add_help=False,
                                   allow_abbrev=False,
                                   argument_default=argparse.SUPPRESS)
  common.add_argument('-v',
                      '--verbose',
                      action='store_true',
                      help='Debug logging')
  common.add_argument('--jobs',
                      type=int,
                      help='Worker threads (default: DLL_JOBS or 1)')
  common.add_argument('--config',
                      type=Path,
                      help='JSON RunConfig; explicit flags override it')
  common.add_argument('--output',
                      type=str,
                      help='Output file (default: stdout)')
  common.add_argument('--format',
                      choices=['csv', 'json'],
                      help='Table format (default: csv)')
  return common


def build_parser() -> argparse.ArgumentParser:
  """Argument parser with one subparser per command."""
  common = _common_parser()
  parser = argparse.ArgumentParser(
      prog='diraclab',
      description='Dirac-Landau edge and bulk numerics',
      formatter_class=argparse.RawDescriptionHelpFormatter,
      epilog=__doc__,
      parents=[common],
      allow_abbrev=False,
      argument_default=argparse.SUPPRESS,
  )
  sub = parser.add_subparsers(dest='command', required=True)

  def add(name: str, help_text: str) -> argparse.ArgumentParser:
    return sub.add_parser(name,
                          help=help_text,
                          parents=[common],
                          allow_abbrev=False,
                          argument_default=argparse.SUPPRESS)

  spectrum = add('spectrum', 'Bulk Landau levels')
  spectrum.add_argument('--b', dest='b', type=float, help='Magnetic field')
  spectrum.add_argument('--kmax', dest='k_max', type=int, help='Level cutoff')

  dispersion = add('dispersion', 'Edge dispersion branches')
  dispersion.add_argument('--b', dest='b', type=float, help='Magnetic field')
  dispersion.add_argument('--xi',
                          dest='xi_range',
                          type=parse_range,
                          help='Sweep start:stop:step')
  dispersion.add_argument('--k',
                          dest='k_set',
                          type=parse_labels,
                          help='Branch labels, e.g. -2..3')
  dispersion.add_argument('--backend',
                          dest='backend',
                          choices=sorted(FIBER_BACKENDS),
                          help='Fiber backend')
  dispersion.add_argument('--grid-n',
                          dest='grid_n',
                          type=int,
                          help='Base grid cells')

  edge = add('edge-trace', 'Bulk-edge correspondence report')
  edge.add_argument('--b', dest='b', type=float, help='Magnetic field')
  edge.add_argument('--island',
                    dest='island',
                    type=parse_labels,
                    help='Contiguous Landau indices, e.g. 0..1')
  edge.add_argument('--margin', dest='margin', type=float, help='Ramp margin')
  edge.add_argument('--xi-step', type=float, help='Sweep step')
  edge.add_argument('--grid-n', dest='grid_n', type=int, help='Base cells')
  edge.add_argument('--tol-bulk-edge', dest='tol_bulk_edge', type=float)
  edge.add_argument('--tol-streda', dest='tol_streda', type=float)

  streda = add('streda', 'IDS slope over b (0.8..1.2)')
  streda.add_argument('--b', dest='b', type=float, help='Centre field')
  streda.add_argument('--island', dest='island', type=parse_labels)
  streda.add_argument('--tol-streda', dest='tol_streda', type=float)

  kernel = add('kernel', 'Kernel entries along x2 = 1.5')
  kernel.add_argument('--kernel', dest='kernel', choices=list(KERNEL_IDS))
  kernel.add_argument('--sqrt-lambda', dest='sqrt_lambda', type=float)
  kernel.add_argument('--b', dest='b', type=float, help='Field of S and T')
  kernel.add_argument('--samples', dest='samples', type=int)

  chern = add('chern', 'Zero-mode Chern character')
  chern.add_argument('--b', dest='b', type=float, help='Magnetic field')
  chern.add_argument('--quad-radius', dest='quad_radius', type=float)
  chern.add_argument('--tol-chern', dest='tol_chern', type=float)

  gap = add('edge-gap', 'Edge spectral gap below 0')
  gap.add_argument('--b', dest='b', type=float, help='Magnetic field')
  gap.add_argument('--grid-n', dest='grid_n', type=int, help='Base cells')

  verify = add('verify', 'Run invariant suites')
  verify.add_argument('--suite',
                      dest='suite',
                      choices=sorted(SUITES) + ['all'],
                      help='Suite to run')
  verify.add_argument('--grid-n', dest='grid_n', type=int, help='Base cells')
  for name in ('tol_bulk_edge', 'tol_chern', 'tol_backend', 'tol_streda'):
    verify.add_argument('--' + name.replace('_', '-'), dest=name, type=float)
  return parser


@dataclass
class Invocation:
  """Resolved command with its configuration."""
  command: str
  config: RunConfig
  overridden: list[str]
  jobs: int

  def metadata(self) -> dict[str, Any]:
    """Sidecar fields, without the worker count."""
    config = self.config.to_dict()
    for name in _RUNTIME_FIELDS:
      config.pop(name, None)
    return {
        'command': self.command,
        'config': config,
        'overridden': [n for n in self.overridden if n not in _RUNTIME_FIELDS],
        'tolerances': self.config.tolerances(),
    }


def resolve_config(args: argparse.Namespace) -> tuple[RunConfig, list[str]]:
  """
  Base config (file or defaults) with explicit flags applied.

  Returns:
    The validated config and the names of the fields set by flags

  Raises:
    DomainError: If a parameter violates an engine precondition
    OSError: If the config file cannot be read
  """
  given = vars(args)
  if 'config' in given:
    base = RunConfig.from_json(Path(given['config']).read_text())
  else:
    base = RunConfig.default()
  names = {f.name for f in fields(RunConfig)}
  overrides = {k: v for k, v in given.items() if k in names}
  if 'xi_step' in given:
    start, stop, _ = overrides.get('xi_range', base.xi_range)
    overrides['xi_range'] = (start, stop, given['xi_step'])
  config = replace(base, **overrides)
  config.validate()
  return config, config.overridden(base)


def _emit_table(inv: Invocation, df: pd.DataFrame,
                schema: TableSchema) -> None:
  output = inv.config.output
  if inv.config.format == 'json':
    doc = {
        'table': schema.name,
        'columns': schema.column_names(),
        'rows': df[schema.column_names()].to_dict(orient='records'),
    }
    _emit_document(inv, doc, TABLE_KEYS)
    return
  writer = CsvWriter(schema)
  if output:
    writer.write(df, Path(output), metadata=inv.metadata())
  else:
    writer.emit(df)


def _emit_document(inv: Invocation, doc: dict[str, Any],
                   schema: JsonSchema) -> None:
  writer = JsonWriter(schema)
  if inv.config.output:
    writer.write(doc, Path(inv.config.output), metadata=inv.metadata())
  else:
    writer.emit(doc)


def cmd_spectrum(inv: Invocation) -> int:
  c = inv.config
  _emit_table(inv, spectrum_table(c.b, c.k_max), SPECTRUM_SCHEMA)
  return EXIT_OK


def cmd_dispersion(inv: Invocation) -> int:
  c = inv.config
  branches = trace_branches(c.b,
                            c.xi_range,
                            c.k_set,
                            jobs=inv.jobs,
                            grid_n=c.grid_n,
                            backend=c.backend)
  _emit_table(inv, dispersion_table(branches), DISPERSION_SCHEMA)
  return EXIT_OK


def cmd_edge_trace(inv: Invocation) -> int:
  c = inv.config
  report = bulk_edge_report(c.spectral_island(),
                            c.b,
                            margin=c.margin,
                            xi_step=c.xi_range[2],
                            grid_n=c.grid_n,
                            jobs=inv.jobs,
                            tol_bulk_edge=c.tol_bulk_edge,
                            tol_streda=c.tol_streda)
  _emit_document(inv, report.to_dict(), REPORT_KEYS)
  return EXIT_OK if report.passed else EXIT_FAILED


def cmd_streda(inv: Invocation) -> int:
  c = inv.config
  island = c.spectral_island()
  out = streda_slope(island, [c.b * s for s in STREDA_GRID])
  slope, chern = out.value
  passed = abs(chern - island.N) <= c.tol_streda
  _emit_document(
      inv, {
          'island': list(island.levels),
          'b_grid': out.diag['b_grid'],
          'streda_slope': slope,
          'chern_estimate': chern,
          'residual': out.diag['residual'],
          'pass': passed,
      }, STREDA_KEYS)
  return EXIT_OK if passed else EXIT_FAILED


def kernel_pairs(samples: int) -> list[tuple[PlanePoint, PlanePoint]]:
  """Targets on the line x2 = 1.5 with the source (0, 0.5) below them."""
  source = PlanePoint(*KERNEL_SOURCE)
  x1 = np.linspace(-KERNEL_HALF_WIDTH, KERNEL_HALF_WIDTH, samples)
  return [(PlanePoint(float(t), KERNEL_TARGET_HEIGHT), source) for t in x1]


def cmd_kernel(inv: Invocation) -> int:
  c = inv.config
  df = kernel_table(c.kernel, kernel_pairs(c.samples),
                    SpectralParameter(c.sqrt_lambda), c.b)
  _emit_table(inv, df, KERNEL_SCHEMA)
  return EXIT_OK


def cmd_chern(inv: Invocation) -> int:
  c = inv.config
  out = chern_zero_mode(c.b, quad_radius=c.quad_radius, jobs=inv.jobs)
  passed = abs(out.value - 1.0) <= c.tol_chern
  _emit_document(
      inv, {
          'b': c.b,
          'chern': out.value,
          'abs_error_estimate': out.diag['abs_error_estimate'],
          'imag_part': out.diag['imag_part'],
          'quad_radius': out.diag['quad_radius'],
          'pass': passed,
      }, CHERN_KEYS)
  return EXIT_OK if passed else EXIT_FAILED


def cmd_edge_gap(inv: Invocation) -> int:
  c = inv.config
  out = locate_edge_gap(c.b, jobs=inv.jobs, grid_n=c.grid_n)
  lambda_bar, upper = out.value
  # Cross-check the empty gap with the configured backend at the maximum.
  check = fiber_eigenvalues(backend_for(c),
                            FiberProblem(c.b, out.diag['xi_at_max']),
                            (lambda_bar + 1e-6, upper - 1e-6))
  if check.value:
    logger.warning('Backend %s finds %s inside the edge gap',
                   check.diag['backend'], check.value)
  _emit_document(
      inv, {
          'b': c.b,
          'lambda_bar': lambda_bar,
          'upper': upper,
          'xi_at_max': out.diag['xi_at_max'],
      }, EDGE_GAP_KEYS)
  return EXIT_OK


def cmd_verify(inv: Invocation) -> int:
  runner = build_suite(inv.config.suite, inv.config)
  ok = runner.run()
  runner.log_summary()
  emits_json = inv.config.format == 'json' or inv.config.output
  if emits_json:
    doc = {
        'suite': inv.config.suite,
        'pass': ok,
        'checks': [{
            'name': r.result.name,
            'ok': r.result.ok,
            'details': r.result.details,
        } for r in runner.results if not r.is_warning],
        'warnings': [{
            'name': r.result.name,
            'ok': r.result.ok,
            'details': r.result.details,
        } for r in runner.results if r.is_warning],
    }
    _emit_document(inv, doc, VERIFY_KEYS)
  if not emits_json or inv.config.output:
    runner.print_summary()
  return EXIT_OK if ok else EXIT_FAILED


COMMANDS: dict[str, Callable[[Invocation], int]] = {
    'spectrum': cmd_spectrum,
    'dispersion': cmd_dispersion,
    'edge-trace': cmd_edge_trace,
    'streda': cmd_streda,
    'kernel': cmd_kernel,
    'chern': cmd_chern,
    'edge-gap': cmd_edge_gap,
    'verify': cmd_verify,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
  """
  Parse argv, dispatch the subcommand and map failures to exit codes.

  Args:
    argv: Arguments without the program name (default: sys.argv[1:])

  Returns:
    0 success, 1 failed verification, 2 usage error, 3 accuracy error
  """
  if argv is None:
    argv = sys.argv[1:]
  parser = build_parser()
  try:
    args = parser.parse_args(_join_signed_values(argv))
  except SystemExit as e:
    return e.code if isinstance(e.code, int) else EXIT_USAGE

  logging.basicConfig(
      level=logging.DEBUG if getattr(args, 'verbose', False) else logging.INFO,
      format='%(asctime)s [%(levelname)s] %(message)s',
      datefmt='%Y-%m-%d %H:%M:%S',
  )

  try:
    config, overridden = resolve_config(args)
    inv = Invocation(command=args.command,
                     config=config,
                     overridden=overridden,
                     jobs=resolve_jobs(config.jobs))
    logger.debug('Running %s with overrides %s', inv.command, overridden)
    return COMMANDS[args.command](inv)
  except AccuracyError as e:
    estimate = '' if math.isnan(e.estimate) else f' (estimate {e.estimate:.3e})'
    logger.error('%s: %s%s', type(e).__name__, e, estimate)
    return EXIT_ACCURACY
  except (ValueError, KeyError, OSError) as e:
    logger.error('%s: %s', type(e).__name__, e)
    return EXIT_USAGE


def main() -> None:
  """Console-script entry point."""
  sys.exit(run())


if __name__ == '__main__':
  main()
