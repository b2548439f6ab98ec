"""
Shared fixtures: corpus locations, model loading and synthetic dataset roots.
"""
from datetime import datetime
from pathlib import Path

import numpy as np
import pytest

from mlq.services.analytics import DataAnalyticsSpec
from mlq.services.metamodel import merge_units, resolve
from mlq.services.ml_pipeline import fit_component
from mlq.services.model_store import BLACKBOX_DOCUMENT, save_model
from mlq.services.parser import parse_model
from mlq.services.runtime import RunOptions
from mlq.services.synthetic import write_synthetic
from mlq.services.validator import apply_automl_defaults
from mlq.utils.helpers import read_text, rebase

REPO = Path(__file__).resolve().parents[2]
CORPUS = REPO / "corpus"
INVALID = CORPUS / "invalid"

VALID_MODELS = [
    ("ping_pong.mlq",),
    ("smart_ping_pong.mlq",),
    ("smarthome.mlq",),
    ("smarthome.mlq", "scenario1_classification.mlq"),
    ("smarthome.mlq", "scenario2_clustering.mlq"),
    ("smarthome.mlq", "scenario3_regression.mlq"),
    ("smarthome.mlq", "scenario4_blackbox.mlq"),
]

FIXED_NOW = datetime(2024, 1, 2, 3, 4, 5)


def corpus_text(name: str) -> str:
    return read_text(str(CORPUS / name))


APPLIANCE_FEATURES = tuple((name, "Double") for name in (
    "fridge", "freezer", "kettle", "toaster", "microwave",
    "dishwasher", "television", "computer", "washer_dryer", "aggregate",
))


def make_spec(features, labels=True, algorithm=None, hyperparameters=(), scaler=None, sequential=True,
              timestamps=False, dataset=None, prediction_type=None, **changes) -> DataAnalyticsSpec:
    """A resolved data_analytics spec built directly, without a model around it."""
    features = tuple(features)
    if prediction_type is None and features:
        prediction_type = features[-1][1] if labels else "Int32"
    spec = DataAnalyticsSpec(
        name="da", thing="Analytics", features=features, labels=labels, prediction_results="result",
        prediction_type=prediction_type, dataset=dataset, automl=False, sequential=sequential,
        timestamps=timestamps, scaler=scaler, algorithm=algorithm, instance_name=None,
        hyperparameters=tuple(hyperparameters), training_results=None, blackbox_ml=False,
        blackbox_ml_model=None, blackbox_import_algorithm=None, dalib=None,
    )
    return spec.with_changes(**changes) if changes else spec


def load_corpus(*names: str, source_overrides=None):
    """Parse, resolve and apply AutoML defaults to corpus files.

    `source_overrides` maps (old, new) text replacements applied to every file.
    """
    units = []
    for name in names:
        text = corpus_text(name)
        for old, new in (source_overrides or ()):
            text = text.replace(old, new)
        units.append(parse_model(text, name))
    model, _ = apply_automl_defaults(resolve(merge_units(units)))
    return model


def options_for(root: Path, **overrides) -> RunOptions:
    options = RunOptions(dataset_root=str(root), now=lambda: FIXED_NOW)
    for key, value in overrides.items():
        setattr(options, key, value)
    return options


def write_datasets(root: Path) -> Path:
    """Write every dataset the corpus refers to under `root`."""
    data = root / "data"
    write_synthetic(str(data / "ip_dataset.csv"), "ping-clients", seed=10, rows=1000)
    write_synthetic(str(data / "smarthome_classify.csv"), "smarthome-classify", seed=10, rows=600)
    write_synthetic(str(data / "smarthome_cluster.csv"), "smarthome-cluster", seed=10, rows=600, target=False)
    write_synthetic(str(data / "smarthome_regress.csv"), "smarthome-regress", seed=10, rows=600, timestamps=True)
    return root


def train_washer_blackbox(root: Path):
    """Fit scenario 2's clustering component and store it where scenario 4 looks for it."""
    model = load_corpus("smarthome.mlq", "scenario2_clustering.mlq")
    spec = model.things["WasherClusterAnalytics"].analytics["washer_clusters"]
    trained, _ = fit_component(spec, rebase(spec.dataset, str(root)), now=FIXED_NOW)
    save_model(str(root / "models" / "washer_kmeans" / BLACKBOX_DOCUMENT), trained)
    return trained


@pytest.fixture
def dataset_root(tmp_path):
    """A dataset root with every dataset the corpus refers to."""
    return write_datasets(tmp_path)


RUNNABLE = [
    ("ping_pong.mlq",),
    ("smart_ping_pong.mlq",),
    ("smarthome.mlq", "scenario1_classification.mlq"),
    ("smarthome.mlq", "scenario2_clustering.mlq"),
    ("smarthome.mlq", "scenario3_regression.mlq"),
    ("smarthome.mlq", "scenario4_blackbox.mlq"),
]

GENERATED_MESSAGES = {"m0": ("a",), "m1": ("a", "b"), "m2": ()}
GENERATED_PORT = "{ sends m0, m1, m2 receives m0, m1, m2 }"


def generated_model(seed: int) -> str:
    """Source of a seeded random network that validates clean.

    Things send, receive and print over two fully typed ports; eventless
    transitions only move forward so no chart can spin.
    """
    rng = np.random.default_rng(seed)

    def pick(items):
        return items[int(rng.integers(len(items)))]

    def expression(params, depth=0):
        if depth >= 2 or rng.random() < 0.4:
            return pick(["x", "y", str(int(rng.integers(0, 10)))] + [f"e.{p}" for p in params])
        ops = ["+", "-", "*", "/"] if rng.random() < 0.2 else ["+", "-", "*"]
        return f"({expression(params, depth + 1)} {pick(ops)} {expression(params, depth + 1)})"

    def action(params, nested=False):
        kind = pick(["assign", "print", "send"] + ([] if nested else ["if"]))
        if kind == "assign":
            return f"{pick(['x', 'y'])} = {expression(params)}"
        if kind == "print":
            return f'print "v=" + {expression(params)}'
        if kind == "send":
            message = pick(sorted(GENERATED_MESSAGES))
            args = ", ".join(expression(params) for _ in GENERATED_MESSAGES[message])
            return f"{pick(['out', 'inp'])}!{message}({args})"
        comparison = pick(["<", ">", "==", "!="])
        return (f"if ({expression(params)} {comparison} {expression(params)}) "
                f"{action(params, True)} else {action(params, True)}")

    def block(params=()):
        actions = [action(params) for _ in range(int(rng.integers(1, 4)))]
        return actions[0] if len(actions) == 1 else "do " + " ".join(actions) + " end"

    lines = ["thing fragment Msgs {", "    message m0(a : Int32)", "    message m1(a : Int32, b : Int32)",
             "    message m2()", "}"]
    n_things = int(rng.integers(2, 4))
    for t in range(n_things):
        n_states = int(rng.integers(2, 5))
        finals = {n_states - 1} if rng.random() < 0.3 else set()
        lines += [
            f"thing T{t} includes Msgs {{",
            f"    required port out {GENERATED_PORT}",
            f"    provided port inp {GENERATED_PORT}",
            f"    property x : Int32 = {int(rng.integers(0, 10))}",
            f"    property y : Int32 = {int(rng.integers(0, 10))}",
            "    statechart S init S0 {",
        ]
        if rng.random() < 0.5:
            lines.append(f"        on entry {block()}")
        for s in range(n_states):
            body = []
            if rng.random() < 0.5:
                body.append(f"on entry {block()}")
            if s not in finals:
                if rng.random() < 0.3:
                    body.append(f"on exit {block()}")
                for port in ("out", "inp"):
                    for message in sorted(GENERATED_MESSAGES):
                        if rng.random() < 0.35:
                            body.append(f"transition -> S{int(rng.integers(n_states))} event e: {port}?{message} "
                                        f"action {block(GENERATED_MESSAGES[message])}")
                if s + 1 < n_states and rng.random() < 0.3:
                    body.append(f"transition -> S{int(rng.integers(s + 1, n_states))} action {block()}")
            keyword = "final state" if s in finals else "state"
            lines.append(f"        {keyword} S{s} {{ {' '.join(body)} }}")
        lines += ["    }", "}"]

    instances = [f"i{k}" for k in range(int(rng.integers(2, 5)))]
    lines.append("configuration C {")
    lines += [f"    instance {name} : T{int(rng.integers(n_things))}" for name in instances]
    for name in instances:
        if rng.random() < 0.8:
            target = pick([other for other in instances if other != name])
            lines.append(f"    connector {name}.out => {target}.inp")
    lines.append("}")
    return "\n".join(lines) + "\n"
