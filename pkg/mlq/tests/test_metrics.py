"""
Tests for held-out evaluation metrics.
"""
import math

import pytest
from hypothesis import given, settings, strategies as st

from mlq.services.analytics import Task
from mlq.services.metrics import classification_metrics, evaluate, purity, regression_metrics
from mlq.services.ml_errors import MetricError


def test_binary_classification_counts():
    truth = ["b", "b", "b", "a", "a"]
    predicted = ["b", "b", "a", "b", "a"]
    metrics = classification_metrics(truth, predicted)
    assert metrics.accuracy == pytest.approx(0.6)
    assert metrics.precision == pytest.approx(2 / 3)
    assert metrics.recall == pytest.approx(2 / 3)
    assert metrics.f1 == pytest.approx(2 / 3)
    assert metrics.support == 5


def test_multiclass_uses_macro_averages():
    truth = ["x", "y", "z", "z"]
    predicted = ["x", "y", "z", "x"]
    metrics = classification_metrics(truth, predicted)
    assert metrics.accuracy == pytest.approx(0.75)
    # x: P 1/2 R 1; y: P 1 R 1; z: P 1 R 1/2
    assert metrics.precision == pytest.approx((0.5 + 1 + 1) / 3)
    assert metrics.recall == pytest.approx((1 + 1 + 0.5) / 3)


def test_zero_denominators_are_flagged():
    metrics = classification_metrics(["a", "a"], ["a", "a"])
    assert metrics.accuracy == 1.0
    metrics = classification_metrics(["b", "b"], ["a", "a"])
    assert metrics.precision == 0.0
    assert "precision" in metrics.zero_division
    assert regression_metrics([], []).zero_division == ["mae", "mse"]


def test_regression_errors():
    metrics = regression_metrics([0.0, 0.0, 0.0], [1.0, -2.0, 0.0])
    assert metrics.mae == pytest.approx(1.0)
    assert metrics.mse == pytest.approx(5 / 3)


def test_length_mismatch():
    with pytest.raises(MetricError):
        regression_metrics([1.0], [1.0, 2.0])
    with pytest.raises(MetricError):
        classification_metrics(["a"], [])


@settings(max_examples=200, deadline=None)
@given(st.lists(
    st.tuples(st.floats(-1e6, 1e6, allow_nan=False), st.floats(-1e6, 1e6, allow_nan=False)),
    min_size=1, max_size=50,
))
def test_mae_never_exceeds_root_mse(pairs):
    truth, predicted = zip(*pairs)
    metrics = regression_metrics(truth, predicted)
    assert metrics.mae <= math.sqrt(metrics.mse) * (1 + 1e-9) + 1e-9


def test_purity_uses_the_best_mapping():
    assert purity(["on", "on", "off", "off"], [1, 1, 0, 0]) == 1.0
    assert purity(["on", "on", "off", "off"], [0, 1, 0, 1]) == 0.5
    assert purity(["a", "a", "a", "b"], [0, 0, 1, 1]) == 0.75
    assert purity([], []) == 0.0


def test_metric_of_another_task_is_rejected():
    with pytest.raises(MetricError, match="mae"):
        evaluate(Task.CLASSIFICATION, ["a"], ["a"], ["accuracy", "mae"])
    with pytest.raises(MetricError):
        evaluate(Task.CLUSTERING, ["a"], [0], ["f1"])


def test_evaluate_dispatches_on_task():
    assert set(evaluate(Task.REGRESSION, [1.0, 2.0], [1.0, 3.0]).populated()) == {"mae", "mse"}
    assert set(evaluate(Task.CLASSIFICATION, ["a"], ["a"]).populated()) == {"accuracy", "precision", "recall", "f1"}
    assert evaluate(Task.CLUSTERING, ["a", "b"], [0, 1]).populated() == {"purity": 1.0}
