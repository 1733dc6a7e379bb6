"""
Schema definitions for the emitted tables and JSON reports.

Each CSV table has a column list with nullable flags and a primary key; each
JSON document a list of required keys. Writers validate against these before
anything reaches disk or stdout.

Usage:
  from diraclab.shared.schemas import SPECTRUM_SCHEMA

  errors = SPECTRUM_SCHEMA.validate(df)
"""

from dataclasses import dataclass
from dataclasses import field
from typing import Any

import pandas as pd


@dataclass
class ColumnSpec:
  """Specification for a single column."""
  name: str
  dtype: str
  nullable: bool = False
  description: str = ''


@dataclass
class TableSchema:
  """Column layout and primary key of one CSV table."""
  name: str
  description: str
  columns: list[ColumnSpec]
  primary_key: list[str] = field(default_factory=list)

  def column_names(self) -> list[str]:
    """Return list of column names."""
    return [c.name for c in self.columns]

  def validate(self, df: pd.DataFrame) -> list[str]:
    """
    Validate DataFrame against schema.

    Returns:
      List of error messages (empty if valid)
    """
    errors = []

    missing = [c for c in self.column_names() if c not in df.columns]
    if missing:
      errors.append(f'Missing columns: {missing}')
    extra = [c for c in df.columns if c not in self.column_names()]
    if extra:
      errors.append(f'Unexpected columns: {extra}')

    pk_cols = [c for c in self.primary_key if c in df.columns]
    if pk_cols:
      duplicates = int(df.duplicated(subset=pk_cols, keep=False).sum())
      if duplicates > 0:
        errors.append(f'Primary key [{", ".join(pk_cols)}] has {duplicates} '
                      'duplicates')

    for col_spec in self.columns:
      if col_spec.nullable or col_spec.name not in df.columns:
        continue
      null_count = int(df[col_spec.name].isna().sum())
      if null_count > 0:
        errors.append(f'{col_spec.name}: {null_count} nulls')

    return errors


@dataclass
class JsonSchema:
  """Required top-level keys of one JSON document."""
  name: str
  keys: list[str]

  def validate(self, data: dict[str, Any]) -> list[str]:
    missing = [k for k in self.keys if k not in data]
    return [f'Missing keys: {missing}'] if missing else []


SPECTRUM_SCHEMA = TableSchema(
    name='spectrum',
    description='Bulk Landau levels, one row per index, 0 once',
    columns=[
        ColumnSpec('k', 'int64', description='Level index'),
        ColumnSpec('lambda', 'float64', description='sgn(k) sqrt(2|k|b)'),
    ],
    primary_key=['k'],
)

DISPERSION_SCHEMA = TableSchema(
    name='dispersion',
    description='Edge branch samples lambda_k(xi) with velocities',
    columns=[
        ColumnSpec('xi', 'float64', description='Fiber momentum'),
        ColumnSpec('k', 'int64', description='Branch label'),
        ColumnSpec('lambda', 'float64', description='Eigenvalue'),
        ColumnSpec('velocity', 'float64', description='<psi, sigma1 psi>'),
        ColumnSpec('bc_residual', 'float64', description='|psi1(0)-psi2(0)|'),
        ColumnSpec('ode_residual', 'float64',
                   description='Discrete eigen-equation residual'),
    ],
    primary_key=['k', 'xi'],
)

KERNEL_SCHEMA = TableSchema(
    name='kernel',
    description='2x2 kernel entries at point pairs',
    columns=[
        ColumnSpec(name, 'float64') for name in [
            'x1', 'x2', 'xp1', 'xp2', 'sqrt_lambda', 're11', 'im11', 're12',
            'im12', 're21', 'im21', 're22', 'im22'
        ]
    ],
)

REPORT_KEYS = JsonSchema(
    name='report',
    keys=[
        'b', 'island', 'bulk_value', 'edge_value', 'streda_slope',
        'chern_estimate', 'spectral_flow', 'abs_err', 'rel_err', 'pass'
    ],
)

STREDA_KEYS = JsonSchema(
    name='streda',
    keys=['island', 'b_grid', 'streda_slope', 'chern_estimate', 'residual'],
)

CHERN_KEYS = JsonSchema(
    name='chern',
    keys=['b', 'chern', 'abs_error_estimate', 'quad_radius'],
)

EDGE_GAP_KEYS = JsonSchema(
    name='edge_gap',
    keys=['b', 'lambda_bar', 'upper', 'xi_at_max'],
)

VERIFY_KEYS = JsonSchema(
    name='verify',
    keys=['suite', 'pass', 'checks', 'warnings'],
)

TABLE_KEYS = JsonSchema(
    name='table',
    keys=['table', 'columns', 'rows'],
)
