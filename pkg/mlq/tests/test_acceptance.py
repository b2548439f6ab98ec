"""
End-to-end scenarios: the ping-pong gate, the four smart-home case studies and black-box parity.
"""
import pytest

from mlq.services.ml_errors import BlackboxError
from mlq.services.ml_pipeline import predict
from mlq.services.runtime import instantiate, run
from mlq.services.synthetic import gen_synthetic
from mlq.utils.helpers import parse_timestamp
from conftest import FIXED_NOW, load_corpus, options_for, train_washer_blackbox


def test_smart_ping_pong_gate_accuracy(dataset_root):
    """Queries injected into the trained analytics instance are classified like their labels."""
    network = instantiate(load_corpus("smart_ping_pong.mlq"), options=options_for(dataset_root))
    run(network)
    already = len(network.trace.of_kind("da-predict"))

    rows = [line.split(",") for line in gen_synthetic("ping-clients", seed=11, rows=200).splitlines()]
    for ip, code, _ in rows:
        network.inject("analytics", "da_service", "query", [ip, int(code)])
    trace = run(network)
    assert not network.has_errors

    predictions = [r.payload["prediction"] for r in trace.of_kind("da-predict")][already:]
    truth = [malicious == "true" for _, _, malicious in rows]
    assert len(predictions) == len(truth)
    accuracy = sum(p == t for p, t in zip(predictions, truth)) / len(truth)
    assert accuracy >= 0.95


def test_classification_scenario(dataset_root):
    network = instantiate(load_corpus("smarthome.mlq", "scenario1_classification.mlq"), options=options_for(dataset_root))
    trace = run(network)
    assert not network.has_errors
    [trained] = trace.of_kind("da-train")
    assert trained.payload["metrics"]["accuracy"] >= 0.9
    predictions = [r.payload["prediction"] for r in trace.of_kind("da-predict")]
    assert len(predictions) == 3
    assert all(isinstance(p, bool) for p in predictions)
    texts = [r.payload["text"] for r in trace.of_kind("print")]
    assert sum(t.startswith("washer-dryer is") for t in texts) == 3
    assert (dataset_root / "data" / "training_classify.txt").is_file()


def test_clustering_scenario(dataset_root):
    network = instantiate(load_corpus("smarthome.mlq", "scenario2_clustering.mlq"), options=options_for(dataset_root))
    trace = run(network)
    assert not network.has_errors
    predictions = [r.payload["prediction"] for r in trace.of_kind("da-predict")]
    assert len(predictions) == 3
    assert set(predictions) <= {0, 1}


def test_regression_scenario_saves_every_prediction(dataset_root):
    dataset = dataset_root / "data" / "smarthome_regress.csv"
    before = dataset.read_text(encoding="utf-8").splitlines()
    network = instantiate(load_corpus("smarthome.mlq", "scenario3_regression.mlq"), options=options_for(dataset_root))
    trace = run(network)
    assert not network.has_errors

    saves = trace.of_kind("da-save")
    assert len(saves) == 3
    after = dataset.read_text(encoding="utf-8").splitlines()
    assert after[:len(before)] == before
    appended = after[len(before):]
    assert len(appended) == len(saves)
    predictions = [r.payload["prediction"] for r in trace.of_kind("da-predict")]
    for line, save, prediction in zip(appended, saves, predictions):
        fields = line.split(",")
        assert len(fields) == 12
        assert parse_timestamp(fields[0]) == FIXED_NOW
        assert fields[1:] == save.payload["values"]
        assert float(fields[-1]) == pytest.approx(prediction)


def test_blackbox_scenario_matches_the_trained_model(dataset_root):
    """A black-box component predicts exactly what the model it was exported from predicts."""
    trained = train_washer_blackbox(dataset_root)
    network = instantiate(load_corpus("smarthome.mlq", "scenario4_blackbox.mlq"), options=options_for(dataset_root))
    trace = run(network)
    assert not network.has_errors
    assert trace.of_kind("da-train") == []
    records = trace.of_kind("da-predict")
    assert len(records) == 3
    for record in records:
        assert record.payload["prediction"] == predict(trained, record.payload["inputs"])


def test_blackbox_scenario_without_its_model_fails_to_start(dataset_root):
    model = load_corpus("smarthome.mlq", "scenario4_blackbox.mlq")
    with pytest.raises(BlackboxError, match="black-box model directory not found"):
        instantiate(model, options=options_for(dataset_root))


def held_out_readings(rows=100):
    text = gen_synthetic("smarthome-cluster", seed=11, rows=rows, target=False)
    return [[float(v) for v in line.split(",")] for line in text.splitlines()]


def predictions_for(network, readings):
    """Run `network` to quiescence, then feed `readings` to its analytics instance."""
    run(network)
    already = len(network.trace.of_kind("da-predict"))
    for values in readings:
        network.inject("analytics", "database", "readings", values)
    trace = run(network)
    assert not network.has_errors
    return [r.payload["prediction"] for r in trace.of_kind("da-predict")][already:]


def test_blackbox_parity_on_held_out_rows(dataset_root):
    """The exported clustering predicts like the clustering trained inside scenario 2, row for row."""
    exported = train_washer_blackbox(dataset_root)
    readings = held_out_readings()
    native = predictions_for(
        instantiate(load_corpus("smarthome.mlq", "scenario2_clustering.mlq"), options=options_for(dataset_root)), readings)
    blackbox = predictions_for(
        instantiate(load_corpus("smarthome.mlq", "scenario4_blackbox.mlq"), options=options_for(dataset_root)), readings)
    assert len(native) == len(readings) == 100
    assert set(native) <= {0, 1}
    assert blackbox == native
    assert blackbox == [predict(exported, values) for values in readings]
