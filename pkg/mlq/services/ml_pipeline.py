# mlq/services/ml_pipeline.py
"""
Orchestration of one data_analytics component:
load -> preprocess -> train -> evaluate, plus prediction on single rows.
"""
import logging
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from mlq.app.schemas import Metrics, TrainingReport
from mlq.utils.helpers import sha256_text
from mlq.utils.preprocessing import FittedScaler, fit_scaler

from .analytics import DataAnalyticsSpec, Family, Task
from .datasets import PreparedData, encode_value, load_dataset, read_table
from .expressions import BOOLEAN, NUMERIC_TYPES, STRING, Value
from .learners import LEARNERS, Learner, Params, make_learner
from .metrics import evaluate
from .ml_errors import MetricError, PredictionError, TrainingError

logger = logging.getLogger(__name__)

Feature = Tuple[str, str]

_log_lock = threading.Lock()


def schema_fingerprint(features: Sequence[Feature]) -> str:
    return sha256_text(";".join(f"{name}:{type_name}" for name, type_name in features))


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Immutable fitted model: learner parameters, scaler and feature schema."""

    family: Family
    task: Task
    params: Params
    scaler: FittedScaler
    features: Tuple[Feature, ...]
    label: Optional[Feature] = None
    classes: Tuple[str, ...] = ()
    prediction_type: Optional[str] = None
    hyperparameters: Dict = field(default_factory=dict)
    trained_at: str = ""

    @property
    def fingerprint(self) -> str:
        return schema_fingerprint(self.features)

    @property
    def k(self) -> int:
        centroids = self.params.get("centroids")
        return 0 if centroids is None else int(centroids.shape[0])

    @cached_property
    def learner(self) -> Learner:
        n_classes = len(self.classes) if self.task is Task.CLASSIFICATION else 0
        return LEARNERS[self.family].from_params(self.params, self.hyperparameters, n_classes)

    def predict_scaled(self, X: np.ndarray) -> np.ndarray:
        """Raw predictions for already-scaled rows: labels, numbers or cluster ids."""
        raw = self.learner.predict(np.asarray(X, dtype=np.float64))
        if self.task is Task.CLASSIFICATION:
            return np.asarray([self.classes[int(i)] for i in raw], dtype=object)
        if self.task is Task.REGRESSION:
            return np.asarray(raw, dtype=np.float64)
        return np.asarray(raw, dtype=np.int64)

    def predict_encoded(self, X: np.ndarray) -> np.ndarray:
        return self.predict_scaled(self.scaler.transform(X))


def preprocess(spec: DataAnalyticsSpec, data: PreparedData) -> Tuple[PreparedData, FittedScaler]:
    """Fit the component's scaler on the train split and apply it to every row."""
    scaler = fit_scaler(spec.scaler_name, data.X_train)
    return data.with_features(scaler.transform(data.X)), scaler


def _threshold_check(task: Task, metrics: Optional[Metrics], threshold) -> Optional[bool]:
    if threshold is None or metrics is None:
        return None
    if task is Task.CLASSIFICATION:
        error = 1.0 - metrics.accuracy
    elif task is Task.REGRESSION:
        error = metrics.mae
    else:
        return None
    return error <= float(threshold)


def train(spec: DataAnalyticsSpec, data: PreparedData, scaler: Optional[FittedScaler] = None,
          now: Optional[datetime] = None) -> Tuple[TrainedModel, TrainingReport]:
    """Fit the component's learner on the (preprocessed) train split.

    Without a scaler the data is taken as-is and an identity scaler is recorded.
    """
    if spec.blackbox_ml:
        raise TrainingError(f"data_analytics '{spec.name}' uses a black-box model and cannot be trained")
    family, task = spec.family, spec.task
    if family is None or task is None:
        raise TrainingError(f"data_analytics '{spec.name}' has no usable algorithm")
    if scaler is None:
        scaler = fit_scaler("none", data.X_train)
    hyper = spec.effective_hyperparameters()

    classes: Tuple[str, ...] = ()
    y_train = None
    if task is Task.CLASSIFICATION:
        classes = tuple(sorted(set(data.y_train.tolist())))
        index = {c: i for i, c in enumerate(classes)}
        y_train = np.asarray([index[v] for v in data.y_train], dtype=np.int64)
    elif task is Task.REGRESSION:
        y_train = data.y_train
    if data.X_train.shape[0] == 0:
        raise TrainingError(f"data_analytics '{spec.name}' has no training rows")

    learner = make_learner(family, hyper, len(classes))
    started = time.perf_counter()
    history = learner.fit(data.X_train, y_train)
    wall_time = time.perf_counter() - started

    model = TrainedModel(
        family=family,
        task=task,
        params=learner.params,
        scaler=scaler,
        features=tuple(spec.input_features),
        label=spec.label_feature,
        classes=classes,
        prediction_type=spec.prediction_type,
        hyperparameters=hyper,
        trained_at=(now or datetime.now()).isoformat(timespec="seconds"),
    )

    metrics = None
    if task is not Task.CLUSTERING and data.X_test.shape[0]:
        metrics = evaluate(task, data.y_test, model.predict_scaled(data.X_test))
    notes = list(learner.notes)
    if scaler.constant_columns:
        notes.append(f"zero-variance columns {list(scaler.constant_columns)} left unscaled")
    threshold = hyper.get("error_threshold")
    report = TrainingReport(
        family=family.value,
        task=task.value,
        hyperparameters=hyper,
        wall_time=wall_time,
        train_size=data.split,
        test_size=data.rows - data.split,
        excluded_rows=data.excluded,
        metrics=metrics,
        loss_history=[float(v) for v in history],
        error_threshold=None if threshold is None else float(threshold),
        threshold_passed=_threshold_check(task, metrics, threshold),
        notes=notes,
    )
    logger.info(f"Trained {family.value} for '{spec.name}' on {data.split} row(s) in {wall_time:.3f}s")
    return model, report


def fit_component(spec: DataAnalyticsSpec, path: Optional[str] = None,
                  now: Optional[datetime] = None) -> Tuple[TrainedModel, TrainingReport]:
    """Load, preprocess and train in one call."""
    data = load_dataset(spec, path)
    data, scaler = preprocess(spec, data)
    return train(spec, data, scaler, now=now)


def _fits(value: Value, type_name: str) -> bool:
    if type_name in NUMERIC_TYPES:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if type_name == BOOLEAN:
        return isinstance(value, bool)
    return isinstance(value, str)


def to_property_value(model: TrainedModel, raw) -> Value:
    """Map one raw prediction to a value of the prediction property's type."""
    ptype = model.prediction_type
    if model.task is Task.CLASSIFICATION:
        label = str(raw)
        return label == "true" if ptype == BOOLEAN else label
    if model.task is Task.REGRESSION:
        return float(raw)
    cluster = int(raw)
    if ptype == BOOLEAN:
        return cluster == 1
    if ptype == STRING:
        return str(cluster)
    return cluster


def predict(model: Optional[TrainedModel], inputs: Sequence[Value]) -> Value:
    if model is None:
        raise PredictionError("model has not been trained")
    if len(inputs) != len(model.features):
        raise PredictionError(f"model expects {len(model.features)} input(s), got {len(inputs)}")
    row = []
    for value, (name, type_name) in zip(inputs, model.features):
        if not _fits(value, type_name):
            raise PredictionError(f"feature '{name}' expects {type_name}, got {value!r}")
        row.append(encode_value(value, type_name))
    raw = model.predict_encoded(np.asarray([row], dtype=np.float64))[0]
    return to_property_value(model, raw)


def evaluation_spec(model: TrainedModel, timestamps: bool = False, with_truth: bool = False) -> DataAnalyticsSpec:
    """A throwaway spec describing a test file for `model` (label or truth column last)."""
    features = tuple(model.features)
    if model.label is not None:
        features += (model.label,)
    elif with_truth:
        features += (("truth", STRING),)
    return DataAnalyticsSpec(
        name="evaluate", thing="", features=features, labels=len(features) > len(model.features),
        prediction_results=None, prediction_type=None, dataset=None, automl=False, sequential=True,
        timestamps=timestamps, scaler=None, algorithm=model.family.value, instance_name=None,
        hyperparameters=(), training_results=None, blackbox_ml=False, blackbox_ml_model=None,
        blackbox_import_algorithm=None, dalib=None,
    )


def evaluate_model(model: TrainedModel, X: np.ndarray, truth: Sequence,
                   requested: Optional[List[str]] = None) -> Metrics:
    """Metrics of `model` on encoded (unscaled) rows against `truth`."""
    return evaluate(model.task, truth, model.predict_encoded(X), requested)


def evaluate_file(model: TrainedModel, path: str, timestamps: bool = False,
                  requested: Optional[List[str]] = None) -> Metrics:
    """Evaluate on every row of a headerless test file.

    Clustering models need one extra trailing column of ground-truth labels.
    """
    offset = 1 if timestamps else 0
    with_truth = False
    if model.task is Task.CLUSTERING:
        with_truth = read_table(path).shape[1] == len(model.features) + offset + 1
        if not with_truth:
            raise MetricError("clustering evaluation needs a trailing column of ground-truth labels")
    data = load_dataset(evaluation_spec(model, timestamps, with_truth), path, test_size=1.0)
    return evaluate_model(model, data.X, data.y, requested)


def append_training_log(path: str, report: TrainingReport, now: Optional[datetime] = None) -> str:
    line = report.log_line((now or datetime.now()).isoformat(timespec="seconds"))
    with _log_lock:
        with open(path, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(line + "\n")
    logger.info(f"Appended training record to {path}")
    return line
