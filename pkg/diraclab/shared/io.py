"""
Output writers for tables and JSON documents.

Files get a `<file>.meta.json` sidecar with the run provenance. Neither the
payload nor the sidecar carries timestamps or host data, so identical
configurations produce byte-identical files.
"""

import json
import logging
from pathlib import Path
import sys
from typing import Any, Optional, TextIO

import numpy as np
import pandas as pd

from diraclab.shared.schemas import JsonSchema
from diraclab.shared.schemas import TableSchema

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.12g'


def _json_default(obj: Any) -> Any:
  """Convert numpy scalars and arrays for json.dumps."""
  if isinstance(obj, np.generic):
    return obj.item()
  if isinstance(obj, np.ndarray):
    return obj.tolist()
  if isinstance(obj, (tuple, set)):
    return list(obj)
  raise TypeError(f'Object of type {type(obj).__name__} is not JSON '
                  'serializable')


def dumps(data: Any) -> str:
  """Deterministic JSON text: 2-space indent, sorted keys."""
  return json.dumps(data,
                    indent=2,
                    sort_keys=True,
                    ensure_ascii=False,
                    default=_json_default)


def _write_sidecar(out_path: Path, meta: dict[str, Any]) -> Path:
  meta_path = out_path.with_suffix(out_path.suffix + '.meta.json')
  meta_path.write_text(dumps(meta) + '\n', encoding='utf-8')
  return meta_path


class CsvWriter:
  """Write DataFrames to CSV with metadata sidecar."""

  def __init__(self, schema: TableSchema):
    self.schema = schema

  def _checked(self, df: pd.DataFrame) -> pd.DataFrame:
    errors = self.schema.validate(df)
    if errors:
      raise ValueError(f'{self.schema.name} table violates its schema: '
                       f'{"; ".join(errors)}')
    return df[self.schema.column_names()]

  def write(
      self,
      df: pd.DataFrame,
      out_path: Path,
      *,
      metadata: Optional[dict[str, Any]] = None,
  ) -> None:
    """
    Write DataFrame to CSV with sidecar metadata.

    Args:
      df: DataFrame to write
      out_path: Output path
      metadata: Additional metadata (command, config echo, tolerances)

    Raises:
      ValueError: If df violates the schema
    """
    df = self._checked(df)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(out_path, index=False, float_format=FLOAT_FORMAT)

    meta = {
        'output': str(out_path),
        'table': self.schema.name,
        'nrows': int(len(df)),
        'ncols': int(df.shape[1]),
        'columns': list(df.columns),
    }
    if metadata:
      meta.update(metadata)
    _write_sidecar(out_path, meta)
    logger.info('Wrote %d rows to %s', len(df), out_path)

  def emit(self, df: pd.DataFrame, stream: Optional[TextIO] = None) -> None:
    """Write the CSV to a stream (stdout by default)."""
    if stream is None:
      stream = sys.stdout
    self._checked(df).to_csv(stream, index=False, float_format=FLOAT_FORMAT)


class JsonWriter:
  """Write JSON documents with metadata sidecar."""

  def __init__(self, schema: JsonSchema):
    self.schema = schema

  def _checked(self, data: dict[str, Any]) -> dict[str, Any]:
    errors = self.schema.validate(data)
    if errors:
      raise ValueError(f'{self.schema.name} document violates its schema: '
                       f'{"; ".join(errors)}')
    return data

  def write(
      self,
      data: dict[str, Any],
      out_path: Path,
      *,
      metadata: Optional[dict[str, Any]] = None,
  ) -> None:
    """
    Write a JSON document with sidecar metadata.

    Args:
      data: Document
      out_path: Output path
      metadata: Additional metadata

    Raises:
      ValueError: If data lacks a required key
    """
    data = self._checked(data)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(dumps(data) + '\n', encoding='utf-8')

    meta = {
        'output': str(out_path),
        'document': self.schema.name,
        'keys': sorted(data),
    }
    if metadata:
      meta.update(metadata)
    _write_sidecar(out_path, meta)
    logger.info('Wrote %s to %s', self.schema.name, out_path)

  def emit(self,
           data: dict[str, Any],
           stream: Optional[TextIO] = None) -> None:
    if stream is None:
      stream = sys.stdout
    stream.write(dumps(self._checked(data)) + '\n')
