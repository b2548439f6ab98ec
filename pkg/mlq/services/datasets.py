# mlq/services/datasets.py
"""
Headerless CSV ingestion and prediction save-back.

Columns are: optional leading timestamp (`dd-mm-yyyy HH:MM:SS`), then one
column per feature in declaration order. A cell reading `NaN` marks the whole
row as missing; such rows are dropped and counted.
"""
import logging
import threading
from dataclasses import dataclass
from datetime import datetime
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from mlq.utils.helpers import format_timestamp, parse_timestamp, string_code

from .analytics import DataAnalyticsSpec, Task
from .expressions import BOOLEAN, NUMERIC_TYPES, STRING, Value, render
from .ml_errors import DataError

logger = logging.getLogger(__name__)

MISSING_MARKER = "NaN"

_TRUE = ("true", "1", "1.0")
_FALSE = ("false", "0", "0.0")

_locks: Dict[str, threading.Lock] = {}
_locks_guard = threading.Lock()


@dataclass(eq=False)
class PreparedData:
    X: np.ndarray
    y: Optional[np.ndarray]
    timestamps: Optional[List[datetime]]
    split: int
    excluded: int = 0

    @property
    def rows(self) -> int:
        return self.X.shape[0]

    @property
    def X_train(self) -> np.ndarray:
        return self.X[:self.split]

    @property
    def X_test(self) -> np.ndarray:
        return self.X[self.split:]

    @property
    def y_train(self) -> Optional[np.ndarray]:
        return None if self.y is None else self.y[:self.split]

    @property
    def y_test(self) -> Optional[np.ndarray]:
        return None if self.y is None else self.y[self.split:]

    def with_features(self, X: np.ndarray) -> "PreparedData":
        return PreparedData(X, self.y, self.timestamps, self.split, self.excluded)


def parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError(f"not a Boolean: {text!r}")


def encode_value(value: Value, type_name: str) -> float:
    """Numeric encoding of one feature value for the learners."""
    if type_name == STRING:
        return string_code(str(value))
    if type_name == BOOLEAN:
        return 1.0 if value else 0.0
    return float(value)


def _encode_cell(cell: str, type_name: str, row: int, column: int) -> float:
    try:
        if type_name == STRING:
            return string_code(cell)
        if type_name == BOOLEAN:
            return 1.0 if parse_bool(cell) else 0.0
        return float(cell)
    except ValueError:
        raise DataError(f"row {row + 1}, column {column + 1}: cannot read {cell!r} as {type_name}")


def _label(cell: str, type_name: str, row: int, column: int):
    if type_name in NUMERIC_TYPES:
        return _encode_cell(cell, type_name, row, column)
    if type_name == BOOLEAN:
        try:
            return "true" if parse_bool(cell) else "false"
        except ValueError:
            raise DataError(f"row {row + 1}, column {column + 1}: cannot read {cell!r} as Boolean")
    return cell


def split_index(rows: int, test_size: float) -> int:
    n_test = int(np.floor(rows * test_size + 1e-9))
    return rows - n_test


def read_table(path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise DataError(f"empty dataset: {path}")
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read dataset {path}: {e}")
    except pd.errors.ParserError as e:
        raise DataError(f"malformed dataset {path}: {e}")


def load_dataset(spec: DataAnalyticsSpec, path: Optional[str] = None, test_size: Optional[float] = None) -> PreparedData:
    """Read the component's dataset and split it into train and test parts."""
    path = path or spec.dataset
    if path is None:
        raise DataError(f"data_analytics '{spec.name}' has no dataset")
    table = read_table(path)
    if table.shape[0] == 0:
        raise DataError(f"empty dataset: {path}")

    offset = 1 if spec.timestamps else 0
    expected = len(spec.features) + offset
    if table.shape[1] != expected:
        raise DataError(f"{path}: expected {expected} column(s), found {table.shape[1]}")

    inputs = spec.input_features
    label = spec.label_feature
    X_rows, y_rows, stamps = [], [], []
    excluded = 0
    for i, cells in enumerate(table.itertuples(index=False, name=None)):
        if not all(isinstance(c, str) for c in cells):
            raise DataError(f"{path}: row {i + 1} has fewer than {expected} column(s)")
        cells = [c.strip() for c in cells]
        if MISSING_MARKER in cells:
            excluded += 1
            continue
        if spec.timestamps:
            try:
                stamps.append(parse_timestamp(cells[0]))
            except ValueError:
                raise DataError(f"row {i + 1}: cannot parse timestamp {cells[0]!r} (expected dd-mm-yyyy HH:MM:SS)")
        X_rows.append([_encode_cell(cells[offset + j], t, i, offset + j) for j, (_, t) in enumerate(inputs)])
        if label is not None:
            y_rows.append(_label(cells[-1], label[1], i, len(cells) - 1))

    if not X_rows:
        raise DataError(f"no usable rows in {path} ({excluded} marked missing)")
    if excluded:
        logger.warning(f"{path}: excluded {excluded} row(s) containing {MISSING_MARKER}")

    X = np.asarray(X_rows, dtype=np.float64).reshape(len(X_rows), len(inputs))
    y = None
    if label is not None:
        y = np.asarray(y_rows, dtype=np.float64 if spec.task is Task.REGRESSION else object)
    timestamps = stamps if spec.timestamps else None

    if not spec.is_sequential:
        order = np.random.default_rng(spec.seed).permutation(X.shape[0])
        X = X[order]
        y = None if y is None else y[order]
        timestamps = None if timestamps is None else [timestamps[k] for k in order]

    share = spec.test_size if test_size is None else test_size
    split = split_index(X.shape[0], share)
    logger.info(f"Loaded {X.shape[0]} row(s) from {path}; train {split}, test {X.shape[0] - split}")
    return PreparedData(X, y, timestamps, split, excluded)


def _lock_for(path: str) -> threading.Lock:
    with _locks_guard:
        return _locks.setdefault(path, threading.Lock())


def save_prediction(spec: DataAnalyticsSpec, path: str, inputs: Sequence[Value], prediction: Optional[Value],
                    now: Optional[datetime] = None) -> str:
    """Append one row to the component's dataset; returns the row text (without newline)."""
    fields: List[str] = []
    if spec.timestamps:
        fields.append(format_timestamp(now or datetime.now()))
    fields.extend(render(v) for v in inputs)
    if spec.labels:
        fields.append(render(prediction) if prediction is not None else MISSING_MARKER)
    row = pd.DataFrame([fields])
    with _lock_for(path):
        try:
            row.to_csv(path, mode="a", header=False, index=False, lineterminator="\n")
        except OSError as e:
            raise DataError(f"cannot append to dataset {path}: {e}")
    return ",".join(fields)
