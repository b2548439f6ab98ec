# mlq/utils/preprocessing.py
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)

SCALER_KINDS = ("standard", "min_max", "none")


@dataclass(frozen=True, eq=False)
class FittedScaler:
    """Column-wise affine map `(x - offset) / scale` fitted on a training split."""

    kind: str
    offset: np.ndarray
    scale: np.ndarray
    constant_columns: Tuple[int, ...] = ()

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return (X - self.offset) / self.scale


def fit_scaler(kind: str, X_train: np.ndarray) -> FittedScaler:
    X_train = np.asarray(X_train, dtype=np.float64)
    n_cols = X_train.shape[1]
    if kind not in SCALER_KINDS:
        raise ValueError(f"unknown scaler '{kind}'")
    if kind == "none" or X_train.shape[0] == 0:
        return FittedScaler("none" if kind == "none" else kind, np.zeros(n_cols), np.ones(n_cols))

    if kind == "standard":
        offset = X_train.mean(axis=0)
        scale = X_train.std(axis=0)  # population std
    else:
        offset = X_train.min(axis=0)
        scale = X_train.max(axis=0) - offset

    constant = tuple(int(i) for i in np.flatnonzero(scale == 0))
    if constant:
        # constant columns pass through untouched
        offset = offset.copy()
        scale = scale.copy()
        offset[list(constant)] = 0.0
        scale[list(constant)] = 1.0
        logger.warning(f"Columns {list(constant)} have zero variance; left unscaled")
    return FittedScaler(kind, offset, scale, constant)
