"""
Tests for trained-model documents and black-box model loading.
"""
import numpy as np
import pytest

from mlq.services.ml_errors import BlackboxError, ModelDocumentError
from mlq.services.ml_pipeline import fit_component, predict
from mlq.services.model_store import (
    HEADER,
    artefact_path,
    deserialize_model,
    load_blackbox,
    load_model,
    save_model,
    serialize_model,
)
from mlq.services.synthetic import write_synthetic
from mlq.utils.helpers import canonical_json, sha256_text
from conftest import APPLIANCE_FEATURES, FIXED_NOW, make_spec

PING_FEATURES = (("client_ip", "String"), ("client_code", "Int32"), ("malicious", "Boolean"))


@pytest.fixture
def tree_model(tmp_path):
    path = tmp_path / "ip.csv"
    write_synthetic(str(path), "ping-clients", seed=10, rows=300)
    spec = make_spec(PING_FEATURES, algorithm="decision_tree_classifier", dataset=str(path))
    model, _ = fit_component(spec, now=FIXED_NOW)
    return model


@pytest.fixture
def kmeans_spec(tmp_path):
    path = tmp_path / "cluster.csv"
    write_synthetic(str(path), "smarthome-cluster", seed=10, rows=300, target=False)
    return make_spec(APPLIANCE_FEATURES, labels=False, algorithm="k_means", scaler="standard",
                     hyperparameters=(("k", 2),), dataset=str(path))


def test_document_round_trip(tree_model):
    document = serialize_model(tree_model)
    assert document.startswith(HEADER + "\n")
    restored = deserialize_model(document)
    assert serialize_model(restored) == document
    assert restored.classes == tree_model.classes
    for key, values in tree_model.params.items():
        assert np.array_equal(restored.params[key], values)
    for row in (["10.0.0.1", 100], ["10.0.0.2", 900]):
        assert predict(restored, row) == predict(tree_model, row)


def test_float_parameters_are_exact(kmeans_spec):
    model, _ = fit_component(kmeans_spec, now=FIXED_NOW)
    restored = deserialize_model(serialize_model(model))
    assert np.array_equal(restored.params["centroids"], model.params["centroids"])
    assert np.array_equal(restored.scaler.scale, model.scaler.scale)


def test_save_and_load(tmp_path, tree_model):
    path = tmp_path / "models" / "tree.mlqm"
    document = save_model(str(path), tree_model)
    assert path.read_text(encoding="utf-8") == document
    assert serialize_model(load_model(str(path))) == document


def test_tampered_document_is_rejected(tree_model):
    lines = serialize_model(tree_model).splitlines()
    index = next(i for i, line in enumerate(lines) if line.startswith("meta trained_at"))
    lines[index] = lines[index].replace("2024", "2025")
    with pytest.raises(ModelDocumentError, match="digest"):
        deserialize_model("\n".join(lines))


def with_meta(model, key, value):
    """Re-seal a document after replacing one metadata line, so only the content is wrong."""
    lines = serialize_model(model).splitlines()[:-1]
    index = next(i for i, line in enumerate(lines) if line.startswith(f"meta {key} "))
    lines[index] = f"meta {key} {value}"
    lines.append(f"end {canonical_json({'digest': sha256_text(chr(10).join(lines))})}")
    return "\n".join(lines) + "\n"


def test_resealed_document_with_the_same_metadata_loads(tree_model):
    scaler = {"kind": tree_model.scaler.kind, "constant_columns": list(tree_model.scaler.constant_columns)}
    restored = deserialize_model(with_meta(tree_model, "scaler", canonical_json(scaler)))
    assert serialize_model(restored) == serialize_model(tree_model)


@pytest.mark.parametrize("scaler", ["[1, 2]", "\"standard\"", "{\"constant_columns\": []}", "{\"kind\": \"standard\", \"constant_columns\": 3}"])
def test_malformed_scaler_metadata_is_a_document_error(tree_model, scaler):
    with pytest.raises(ModelDocumentError, match="scaler metadata"):
        deserialize_model(with_meta(tree_model, "scaler", scaler))


def test_truncated_document_is_rejected(tree_model):
    lines = serialize_model(tree_model).splitlines()
    with pytest.raises(ModelDocumentError, match="truncated"):
        deserialize_model("\n".join(lines[:-1]))


@pytest.mark.parametrize("document, message", [
    ("", "not a model document"),
    ("hello\n", "not a model document"),
    ("MLQM/2\n", "unsupported"),
    (HEADER + "\nmeta family {broken\n", "corrupted"),
])
def test_malformed_documents(document, message):
    with pytest.raises(ModelDocumentError, match=message):
        deserialize_model(document)


def test_artefact_path():
    assert artefact_path("data/ip.csv", "analytics", "da1") == "data/ip.csv.analytics.da1.mlqm"


def blackbox_spec(spec, directory, algorithm="KMeans"):
    return spec.with_changes(blackbox_ml=True, blackbox_ml_model=directory, blackbox_import_algorithm=algorithm,
                             algorithm=None, scaler=None, hyperparameters=())


def test_load_blackbox(tmp_path, kmeans_spec):
    model, _ = fit_component(kmeans_spec, now=FIXED_NOW)
    save_model(str(tmp_path / "models" / "washer" / "model.mlqm"), model)
    loaded = load_blackbox(blackbox_spec(kmeans_spec, "models/washer"), str(tmp_path))
    assert loaded.k == 2
    assert loaded.prediction_type == kmeans_spec.prediction_type
    row = [1.0] * len(APPLIANCE_FEATURES)
    assert predict(loaded, row) == predict(model, row)


def test_blackbox_errors(tmp_path, kmeans_spec, tree_model):
    with pytest.raises(BlackboxError, match="not a black-box"):
        load_blackbox(kmeans_spec, str(tmp_path))
    with pytest.raises(BlackboxError, match="not found"):
        load_blackbox(blackbox_spec(kmeans_spec, "models/missing"), str(tmp_path))

    empty = tmp_path / "models" / "empty"
    empty.mkdir(parents=True)
    with pytest.raises(BlackboxError, match="found 0"):
        load_blackbox(blackbox_spec(kmeans_spec, "models/empty"), str(tmp_path))

    save_model(str(tmp_path / "models" / "tree" / "model.mlqm"), tree_model)
    with pytest.raises(BlackboxError, match="decision_tree_classifier"):
        load_blackbox(blackbox_spec(kmeans_spec, "models/tree"), str(tmp_path))
    with pytest.raises(BlackboxError, match="feature schema"):
        load_blackbox(blackbox_spec(kmeans_spec, "models/tree", "decision_tree"), str(tmp_path))

    broken = tmp_path / "models" / "broken"
    broken.mkdir()
    (broken / "model.mlqm").write_text("MLQM/1\n", encoding="utf-8")
    with pytest.raises(BlackboxError, match="truncated"):
        load_blackbox(blackbox_spec(kmeans_spec, "models/broken"), str(tmp_path))
