import pandas as pd

from diraclab.shared.schemas import DISPERSION_SCHEMA
from diraclab.shared.schemas import KERNEL_SCHEMA
from diraclab.shared.schemas import REPORT_KEYS


class TestSchemas:
  """Tests for TableSchema and JsonSchema."""

  def test_duplicate_primary_key(self):
    """Two samples of one branch at the same xi are rejected."""
    df = pd.DataFrame({
        'xi': [0.0, 0.0],
        'k': [1, 1],
        'lambda': [1.0, 1.1],
        'velocity': [0.1, 0.1],
        'bc_residual': [0.0, 0.0],
        'ode_residual': [0.0, 0.0],
    })
    errors = DISPERSION_SCHEMA.validate(df)
    assert any('duplicates' in e for e in errors)

  def test_nulls_rejected(self):
    """Non-nullable columns must not hold NaN."""
    df = pd.DataFrame({c: [float('nan')] for c in KERNEL_SCHEMA.column_names()})
    assert any('nulls' in e for e in KERNEL_SCHEMA.validate(df))

  def test_unexpected_column(self):
    """Extra columns are reported."""
    df = pd.DataFrame({c: [0.0] for c in KERNEL_SCHEMA.column_names()})
    df['extra'] = 1.0
    assert KERNEL_SCHEMA.validate(df) == ["Unexpected columns: ['extra']"]

  def test_report_keys(self):
    """The report schema requires the pass flag."""
    assert REPORT_KEYS.validate({'b': 1.0}) != []
    assert 'pass' in REPORT_KEYS.keys
