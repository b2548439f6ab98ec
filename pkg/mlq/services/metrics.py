# mlq/services/metrics.py
"""Held-out evaluation: classification counts, regression errors, clustering purity."""
import itertools
import logging
from typing import Iterable, Optional, Sequence

import numpy as np

from mlq.app.schemas import Metrics

from .analytics import Task
from .ml_errors import MetricError

logger = logging.getLogger(__name__)

TASK_METRICS = {
    Task.CLASSIFICATION: ("accuracy", "precision", "recall", "f1"),
    Task.REGRESSION: ("mae", "mse"),
    Task.CLUSTERING: ("purity",),
}

EXHAUSTIVE_PURITY_LIMIT = 8


def _ratio(numerator: float, denominator: float, name: str, flags: list) -> float:
    if denominator == 0:
        flags.append(name)
        return 0.0
    return numerator / denominator


def classification_metrics(truth: Sequence, predicted: Sequence) -> Metrics:
    """Accuracy plus precision/recall/F1; binary problems use the last sorted class as positive."""
    truth = np.asarray(truth, dtype=object)
    predicted = np.asarray(predicted, dtype=object)
    if truth.shape != predicted.shape:
        raise MetricError("truth and prediction lengths differ")
    n = truth.shape[0]
    flags: list = []
    classes = sorted(set(truth.tolist()) | set(predicted.tolist()), key=str)
    accuracy = _ratio(float(np.sum(truth == predicted)), n, "accuracy", flags)

    def counts(positive):
        tp = int(np.sum((truth == positive) & (predicted == positive)))
        fp = int(np.sum((truth != positive) & (predicted == positive)))
        fn = int(np.sum((truth == positive) & (predicted != positive)))
        return tp, fp, fn

    if len(classes) <= 2:
        tp, fp, fn = counts(classes[-1]) if classes else (0, 0, 0)
        precision = _ratio(tp, tp + fp, "precision", flags)
        recall = _ratio(tp, tp + fn, "recall", flags)
        f1 = _ratio(2 * tp, 2 * tp + fp + fn, "f1", flags)
    else:
        per_class = []
        for c in classes:
            tp, fp, fn = counts(c)
            scratch: list = []
            per_class.append((
                _ratio(tp, tp + fp, "precision", scratch),
                _ratio(tp, tp + fn, "recall", scratch),
                _ratio(2 * tp, 2 * tp + fp + fn, "f1", scratch),
            ))
            flags.extend(f for f in scratch if f not in flags)
        precision, recall, f1 = (float(np.mean(col)) for col in zip(*per_class))
    return Metrics(task=Task.CLASSIFICATION.value, support=n, accuracy=accuracy, precision=precision,
                   recall=recall, f1=f1, zero_division=flags)


def regression_metrics(truth: Sequence[float], predicted: Sequence[float]) -> Metrics:
    truth = np.asarray(truth, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if truth.shape != predicted.shape:
        raise MetricError("truth and prediction lengths differ")
    flags: list = []
    n = truth.shape[0]
    err = predicted - truth
    mae = _ratio(float(np.sum(np.abs(err))), n, "mae", flags)
    mse = _ratio(float(np.sum(err ** 2)), n, "mse", flags)
    return Metrics(task=Task.REGRESSION.value, support=n, mae=mae, mse=mse, zero_division=flags)


def purity(truth: Sequence, clusters: Sequence[int]) -> float:
    """Accuracy under the best one-to-one mapping of clusters to labels."""
    truth = np.asarray(truth, dtype=object)
    clusters = np.asarray(clusters, dtype=np.int64)
    n = truth.shape[0]
    if n == 0:
        return 0.0
    labels = sorted(set(truth.tolist()), key=str)
    ids = sorted(set(clusters.tolist()))
    table = np.array([[np.sum((clusters == c) & (truth == lab)) for lab in labels] for c in ids])
    if len(ids) <= EXHAUSTIVE_PURITY_LIMIT:
        width = max(len(ids), len(labels))
        padded = np.zeros((len(ids), width), dtype=np.int64)
        padded[:, :len(labels)] = table
        best = max(
            sum(padded[i, col] for i, col in enumerate(perm))
            for perm in itertools.permutations(range(width), len(ids))
        )
    else:
        best = int(table.max(axis=1).sum())
    return float(best) / n


def clustering_metrics(truth: Sequence, clusters: Sequence[int]) -> Metrics:
    return Metrics(task=Task.CLUSTERING.value, support=len(clusters), purity=purity(truth, clusters))


def evaluate(task: Task, truth: Sequence, predicted: Sequence, requested: Optional[Iterable[str]] = None) -> Metrics:
    """Metrics for `task`; asking for a metric of another task raises `MetricError`."""
    allowed = TASK_METRICS[task]
    for name in requested or ():
        if name not in allowed:
            raise MetricError(f"metric '{name}' does not apply to {task.value}")
    if task is Task.CLASSIFICATION:
        metrics = classification_metrics(truth, predicted)
    elif task is Task.REGRESSION:
        metrics = regression_metrics(truth, predicted)
    else:
        metrics = clustering_metrics(truth, predicted)
    if metrics.zero_division:
        logger.warning(f"Zero denominators for {metrics.zero_division}; reported as 0")
    return metrics
