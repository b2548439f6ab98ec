# mlq/services/model_store.py
"""
Trained-model documents (`.mlqm`).

A document is line-delimited text:

    MLQM/1
    meta <key> <json>
    array <key> {"dtype": ..., "shape": [...], "data": [...]}
    end {"digest": "<sha256 of every line above>"}

Floats are written with their shortest round-trip representation, so
deserializing gives back the exact parameter arrays.
"""
import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from mlq.utils.helpers import canonical_json, read_text, rebase, sha256_text, write_text
from mlq.utils.preprocessing import FittedScaler

from .analytics import DataAnalyticsSpec, Family, Task, normalize_family
from .ml_errors import BlackboxError, ModelDocumentError
from .ml_pipeline import TrainedModel, schema_fingerprint

logger = logging.getLogger(__name__)

FORMAT = "MLQM"
VERSION = 1
HEADER = f"{FORMAT}/{VERSION}"
EXTENSION = ".mlqm"
BLACKBOX_DOCUMENT = "model.mlqm"

_META_KEYS = ("family", "task", "features", "label", "classes", "prediction_type",
              "hyperparameters", "trained_at", "fingerprint", "scaler")
_DTYPES = ("float64", "int64")


def _array_json(values: np.ndarray) -> str:
    values = np.asarray(values)
    dtype = "int64" if np.issubdtype(values.dtype, np.integer) else "float64"
    cast = int if dtype == "int64" else float
    data = [cast(v) for v in values.reshape(-1)]
    return canonical_json({"dtype": dtype, "shape": list(values.shape), "data": data})


def serialize_model(model: TrainedModel) -> str:
    meta = {
        "family": model.family.value,
        "task": model.task.value,
        "features": [list(f) for f in model.features],
        "label": list(model.label) if model.label else None,
        "classes": list(model.classes),
        "prediction_type": model.prediction_type,
        "hyperparameters": model.hyperparameters,
        "trained_at": model.trained_at,
        "fingerprint": model.fingerprint,
        "scaler": {"kind": model.scaler.kind, "constant_columns": list(model.scaler.constant_columns)},
    }
    lines = [HEADER]
    lines.extend(f"meta {key} {canonical_json(meta[key])}" for key in _META_KEYS)
    lines.append(f"array scaler.offset {_array_json(model.scaler.offset)}")
    lines.append(f"array scaler.scale {_array_json(model.scaler.scale)}")
    lines.extend(f"array param.{name} {_array_json(model.params[name])}" for name in sorted(model.params))
    lines.append(f"end {canonical_json({'digest': sha256_text(chr(10).join(lines))})}")
    return "\n".join(lines) + "\n"


def _read_array(key: str, payload) -> np.ndarray:
    if not isinstance(payload, dict) or payload.get("dtype") not in _DTYPES:
        raise ModelDocumentError(f"array '{key}' has no valid dtype")
    shape, data = payload.get("shape"), payload.get("data")
    if not isinstance(shape, list) or not isinstance(data, list) or int(np.prod(shape)) != len(data):
        raise ModelDocumentError(f"array '{key}' does not match its shape")
    return np.asarray(data, dtype=payload["dtype"]).reshape(shape)


def deserialize_model(document: str) -> TrainedModel:
    lines = document.splitlines()
    if not lines or not lines[0].startswith(f"{FORMAT}/"):
        raise ModelDocumentError("not a model document")
    if lines[0] != HEADER:
        raise ModelDocumentError(f"unsupported model document version '{lines[0]}' (expected {HEADER})")

    meta: Dict[str, object] = {}
    arrays: Dict[str, np.ndarray] = {}
    body: List[str] = [lines[0]]
    ended = False
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split(" ", 2)
        if ended or len(parts) < 2:
            raise ModelDocumentError(f"corrupted model document at line {number}")
        try:
            payload = json.loads(parts[-1])
        except json.JSONDecodeError:
            raise ModelDocumentError(f"corrupted model document at line {number}")
        if parts[0] == "end" and len(parts) == 2:
            if not isinstance(payload, dict) or payload.get("digest") != sha256_text("\n".join(body)):
                raise ModelDocumentError("model document digest mismatch")
            ended = True
            continue
        if len(parts) != 3 or parts[0] not in ("meta", "array"):
            raise ModelDocumentError(f"corrupted model document at line {number}")
        if parts[0] == "meta":
            meta[parts[1]] = payload
        else:
            arrays[parts[1]] = _read_array(parts[1], payload)
        body.append(line)
    if not ended:
        raise ModelDocumentError("truncated model document")

    missing = [k for k in _META_KEYS if k not in meta]
    if missing or "scaler.offset" not in arrays or "scaler.scale" not in arrays:
        raise ModelDocumentError(f"model document lacks {missing or 'scaler arrays'}")
    try:
        family = Family(meta["family"])
    except ValueError:
        raise ModelDocumentError(f"unknown family tag {meta['family']!r}")
    try:
        task = Task(meta["task"])
    except ValueError:
        raise ModelDocumentError(f"unknown task tag {meta['task']!r}")

    scaler_meta = meta["scaler"]
    if not isinstance(scaler_meta, dict) or not isinstance(scaler_meta.get("kind"), str) \
            or not isinstance(scaler_meta.get("constant_columns", []), list):
        raise ModelDocumentError("scaler metadata is not an object with a kind")
    scaler = FittedScaler(
        scaler_meta["kind"], arrays["scaler.offset"], arrays["scaler.scale"],
        tuple(scaler_meta.get("constant_columns", ())),
    )
    model = TrainedModel(
        family=family,
        task=task,
        params={k[len("param."):]: v for k, v in arrays.items() if k.startswith("param.")},
        scaler=scaler,
        features=tuple((name, type_name) for name, type_name in meta["features"]),
        label=tuple(meta["label"]) if meta["label"] else None,
        classes=tuple(meta["classes"]),
        prediction_type=meta["prediction_type"],
        hyperparameters=dict(meta["hyperparameters"]),
        trained_at=meta["trained_at"],
    )
    if model.fingerprint != meta["fingerprint"]:
        raise ModelDocumentError("feature schema does not match its fingerprint")
    return model


def save_model(path: str, model: TrainedModel) -> str:
    document = serialize_model(model)
    write_text(path, document)
    return document


def load_model(path: str) -> TrainedModel:
    return deserialize_model(read_text(path))


def artefact_path(dataset: str, instance: str, component: str) -> str:
    return f"{dataset}.{instance}.{component}{EXTENSION}"


def load_blackbox(spec: DataAnalyticsSpec, root: Optional[str] = None) -> TrainedModel:
    """Load the externally trained model of a black-box component and check it against the component declaration."""
    if not spec.blackbox_ml or not spec.blackbox_ml_model:
        raise BlackboxError(f"data_analytics '{spec.name}' is not a black-box component")
    directory = Path(rebase(spec.blackbox_ml_model, root))
    if not directory.is_dir():
        raise BlackboxError(f"black-box model directory not found: {directory}")
    document = directory / BLACKBOX_DOCUMENT
    if not document.is_file():
        candidates = sorted(directory.glob(f"*{EXTENSION}"))
        if len(candidates) != 1:
            raise BlackboxError(f"expected one {EXTENSION} document in {directory}, found {len(candidates)}")
        document = candidates[0]

    try:
        model = load_model(str(document))
    except ModelDocumentError as e:
        raise BlackboxError(f"{document}: {e}")
    expected = normalize_family(spec.blackbox_import_algorithm)
    if model.family is not expected:
        raise BlackboxError(
            f"{document} holds a {model.family.value} model, "
            f"blackbox_import_algorithm names {spec.blackbox_import_algorithm!r}"
        )
    if model.fingerprint != schema_fingerprint(spec.input_features) or model.task is not spec.task:
        raise BlackboxError(f"{document} was trained on a different feature schema")
    logger.info(f"Loaded black-box {model.family.value} model from {document}")
    return replace(model, prediction_type=spec.prediction_type)
