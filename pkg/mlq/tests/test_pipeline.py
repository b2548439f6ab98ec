"""
Tests for the load -> preprocess -> train -> evaluate pipeline and single-row prediction.
"""
import numpy as np
import pytest

from mlq.services.datasets import load_dataset
from mlq.services.ml_errors import MetricError, PredictionError, TrainingError
from mlq.services.ml_pipeline import (
    append_training_log,
    evaluate_file,
    fit_component,
    predict,
    preprocess,
    schema_fingerprint,
    train,
)
from mlq.services.synthetic import write_synthetic
from conftest import APPLIANCE_FEATURES, FIXED_NOW, make_spec

PING_FEATURES = (("client_ip", "String"), ("client_code", "Int32"), ("malicious", "Boolean"))


def ping_spec(tmp_path, rows=1000, seed=10, **changes):
    path = tmp_path / f"ip_{seed}.csv"
    write_synthetic(str(path), "ping-clients", seed=seed, rows=rows)
    return make_spec(PING_FEATURES, algorithm="decision_tree_classifier", dataset=str(path), **changes)


def test_tree_learns_the_malicious_code_threshold(tmp_path):
    model, report = fit_component(ping_spec(tmp_path), now=FIXED_NOW)
    assert report.task == "classification"
    assert report.train_size == 800 and report.test_size == 200
    assert report.metrics.accuracy >= 0.95
    assert predict(model, ["10.0.3.4", 900]) is True
    assert predict(model, ["10.0.3.4", 120]) is False


def test_report_records_hyperparameters_and_time(tmp_path):
    spec = ping_spec(tmp_path, hyperparameters=(("max_depth", 3), ("error_threshold", 0.5)))
    _, report = fit_component(spec, now=FIXED_NOW)
    assert report.hyperparameters["max_depth"] == 3
    assert report.hyperparameters["seed"] == 10
    assert report.wall_time >= 0
    assert report.threshold_passed is True


def test_preprocess_fits_on_the_train_split_only(tmp_path):
    path = tmp_path / "classify.csv"
    write_synthetic(str(path), "smarthome-classify", seed=10, rows=200)
    spec = make_spec(APPLIANCE_FEATURES + (("washer_on", "Boolean"),), scaler="standard")
    data = load_dataset(spec, str(path))
    scaled, scaler = preprocess(spec, data)
    assert np.allclose(scaler.offset, data.X_train.mean(axis=0))
    assert np.allclose(scaled.X, (data.X - scaler.offset) / scaler.scale)
    assert scaled.split == data.split


def test_zero_variance_columns_are_noted(tmp_path):
    path = tmp_path / "flat.csv"
    path.write_text("".join(f"{i},5,{2 * i + 1}\n" for i in range(20)), encoding="utf-8")
    spec = make_spec((("x", "Double"), ("flat", "Double"), ("y", "Double")),
                     algorithm="linear_regression", scaler="standard", dataset=str(path))
    model, report = fit_component(spec, now=FIXED_NOW)
    assert model.scaler.constant_columns == (1,)
    assert any("zero-variance" in note for note in report.notes)
    assert predict(model, [30.0, 5.0]) == pytest.approx(61.0, abs=1e-3)


def test_regression_with_timestamps(tmp_path):
    path = tmp_path / "regress.csv"
    write_synthetic(str(path), "smarthome-regress", seed=10, rows=300, timestamps=True)
    spec = make_spec(APPLIANCE_FEATURES + (("washer_next", "Double"),), algorithm="linear_regression",
                     scaler="standard", timestamps=True, dataset=str(path))
    model, report = fit_component(spec, now=FIXED_NOW)
    assert report.metrics.mae >= 0
    assert report.metrics.mse >= report.metrics.mae ** 2 - 1e-9
    assert isinstance(predict(model, [1.0] * 10), float)


def test_clustering_prediction_types(tmp_path):
    path = tmp_path / "cluster.csv"
    write_synthetic(str(path), "smarthome-cluster", seed=10, rows=300, target=False)
    base = make_spec(APPLIANCE_FEATURES, labels=False, algorithm="k_means", scaler="standard",
                     hyperparameters=(("k", 2),), dataset=str(path))
    row = [1.0] * 10
    for ptype, kind in (("Int32", int), ("String", str), ("Boolean", bool)):
        model, report = fit_component(base.with_changes(prediction_type=ptype), now=FIXED_NOW)
        assert report.metrics is None
        assert type(predict(model, row)) is kind


def test_predict_errors(tmp_path):
    model, _ = fit_component(ping_spec(tmp_path, rows=200), now=FIXED_NOW)
    with pytest.raises(PredictionError, match="not been trained"):
        predict(None, ["10.0.0.1", 5])
    with pytest.raises(PredictionError, match="expects 2"):
        predict(model, ["10.0.0.1"])
    with pytest.raises(PredictionError, match="client_code"):
        predict(model, ["10.0.0.1", "five"])


def test_blackbox_components_are_not_trained(tmp_path):
    spec = ping_spec(tmp_path, rows=50)
    data = load_dataset(spec)
    with pytest.raises(TrainingError, match="black-box"):
        train(spec.with_changes(blackbox_ml=True, blackbox_import_algorithm="decision_tree"), data)


def test_evaluate_file(tmp_path):
    model, _ = fit_component(ping_spec(tmp_path), now=FIXED_NOW)
    held_out = tmp_path / "held_out.csv"
    write_synthetic(str(held_out), "ping-clients", seed=11, rows=200)
    metrics = evaluate_file(model, str(held_out), requested=["accuracy"])
    assert metrics.support == 200
    assert metrics.accuracy >= 0.95
    with pytest.raises(MetricError):
        evaluate_file(model, str(held_out), requested=["mse"])


def test_evaluate_clustering_needs_truth(tmp_path):
    train_path = tmp_path / "cluster.csv"
    write_synthetic(str(train_path), "smarthome-cluster", seed=10, rows=300, target=False)
    spec = make_spec(APPLIANCE_FEATURES, labels=False, algorithm="k_means", scaler="standard",
                     hyperparameters=(("k", 2),), dataset=str(train_path))
    model, _ = fit_component(spec, now=FIXED_NOW)
    with pytest.raises(MetricError, match="ground-truth"):
        evaluate_file(model, str(train_path))
    labeled = tmp_path / "labeled.csv"
    write_synthetic(str(labeled), "smarthome-cluster", seed=12, rows=300)
    assert evaluate_file(model, str(labeled)).purity >= 0.9


def test_training_log_lines(tmp_path):
    _, report = fit_component(ping_spec(tmp_path, rows=200), now=FIXED_NOW)
    log = tmp_path / "training.log"
    first = append_training_log(str(log), report, now=FIXED_NOW)
    append_training_log(str(log), report, now=FIXED_NOW)
    lines = log.read_text(encoding="utf-8").splitlines()
    assert lines == [first, first]
    timestamp, family, hyper, metrics = first.split("\t")
    assert timestamp == "2024-01-02T03:04:05"
    assert family == "decision_tree_classifier"
    assert '"max_depth":5' in hyper
    assert '"accuracy"' in metrics


def test_schema_fingerprint_depends_on_names_types_and_order():
    base = schema_fingerprint([("a", "Double"), ("b", "Int32")])
    assert base == schema_fingerprint([("a", "Double"), ("b", "Int32")])
    assert base != schema_fingerprint([("b", "Int32"), ("a", "Double")])
    assert base != schema_fingerprint([("a", "Float"), ("b", "Int32")])
