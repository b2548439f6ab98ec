# mlq/services/analytics.py
"""
Catalog of supported learning families and the resolved data_analytics
declaration that the validator, the ML pipeline and the runtime share.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple, Union

from mlq.app.config import settings

from . import ast
from .expressions import BOOLEAN, INTEGER_TYPES, NUMERIC_TYPES, STRING

HyperValue = Union[int, float, str]


class Family(str, Enum):
    LINEAR_REGRESSION = "linear_regression"
    LOGISTIC_REGRESSION = "logistic_regression"
    GAUSSIAN_NAIVE_BAYES = "gaussian_naive_bayes"
    DECISION_TREE = "decision_tree_classifier"
    MLP = "nn_multilayer_perceptron"
    K_MEANS = "k_means"


class Task(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"
    CLUSTERING = "clustering"


FAMILY_ALIASES: Dict[str, Family] = {
    "linearregression": Family.LINEAR_REGRESSION,
    "logisticregression": Family.LOGISTIC_REGRESSION,
    "gaussiannb": Family.GAUSSIAN_NAIVE_BAYES,
    "naive_bayes": Family.GAUSSIAN_NAIVE_BAYES,
    "decisiontreeclassifier": Family.DECISION_TREE,
    "decision_tree": Family.DECISION_TREE,
    "mlp": Family.MLP,
    "mlpclassifier": Family.MLP,
    "mlpregressor": Family.MLP,
    "kmeans": Family.K_MEANS,
}

FAMILY_TASKS: Dict[Family, Tuple[Task, ...]] = {
    Family.LINEAR_REGRESSION: (Task.REGRESSION,),
    Family.LOGISTIC_REGRESSION: (Task.CLASSIFICATION,),
    Family.GAUSSIAN_NAIVE_BAYES: (Task.CLASSIFICATION,),
    Family.DECISION_TREE: (Task.CLASSIFICATION,),
    Family.MLP: (Task.CLASSIFICATION, Task.REGRESSION),
    Family.K_MEANS: (Task.CLUSTERING,),
}

COMMON_KEYS = ("seed", "error_threshold", "test_size")

FAMILY_KEYS: Dict[Family, Tuple[str, ...]] = {
    Family.LINEAR_REGRESSION: COMMON_KEYS,
    Family.LOGISTIC_REGRESSION: COMMON_KEYS + ("lr", "epochs"),
    Family.GAUSSIAN_NAIVE_BAYES: COMMON_KEYS,
    Family.DECISION_TREE: COMMON_KEYS + ("max_depth",),
    Family.MLP: COMMON_KEYS + ("optimizer", "loss", "batch_size", "epochs", "lr", "hidden_size", "activation"),
    Family.K_MEANS: COMMON_KEYS + ("k",),
}

KEY_ALIASES = {
    "learning_rate": "lr",
    "learning_rate_init": "lr",
    "n_clusters": "k",
    "random_state": "seed",
    "hidden_layer_sizes": "hidden_size",
    "max_iter": "epochs",
    "n_epochs": "epochs",
}

INTEGER_KEYS = ("batch_size", "epochs", "hidden_size", "k", "max_depth", "seed")
FLOAT_KEYS = ("lr", "error_threshold", "test_size")

OPTIMIZERS = {"sgd": "sgd", "adam": "adam"}
LOSSES = {
    "sparsecategoricalcrossentropy": "cross_entropy",
    "sparse_categorical_crossentropy": "cross_entropy",
    "categorical_crossentropy": "cross_entropy",
    "cross_entropy": "cross_entropy",
    "log_loss": "cross_entropy",
    "mse": "squared_error",
    "meansquarederror": "squared_error",
    "mean_squared_error": "squared_error",
    "squared_error": "squared_error",
}
ACTIVATIONS = {"relu": "relu", "sigmoid": "sigmoid", "logistic": "sigmoid"}

SCALERS = {
    "standard": "standard",
    "standardscaler": "standard",
    "zscore": "standard",
    "min_max": "min_max",
    "minmax": "min_max",
    "minmaxscaler": "min_max",
    "none": "none",
}

DEFAULTS: Dict[Family, Dict[str, HyperValue]] = {
    Family.LINEAR_REGRESSION: {},
    Family.LOGISTIC_REGRESSION: {"lr": 0.05, "epochs": 500},
    Family.GAUSSIAN_NAIVE_BAYES: {},
    Family.DECISION_TREE: {"max_depth": 5},
    Family.MLP: {
        "optimizer": "sgd", "batch_size": 32, "epochs": 50, "lr": 0.01,
        "hidden_size": 100, "activation": "relu",
    },
    Family.K_MEANS: {"k": 2},
}

# families that benefit from scaled inputs when the scaler is left to AutoML
SCALED_FAMILIES = (Family.MLP, Family.LOGISTIC_REGRESSION, Family.K_MEANS)


def normalize_family(name: Optional[str]) -> Optional[Family]:
    if not name:
        return None
    key = name.strip()
    try:
        return Family(key.lower())
    except ValueError:
        return FAMILY_ALIASES.get(key.lower().replace("-", "_"))


def normalize_key(key: str) -> str:
    return KEY_ALIASES.get(key, key)


def normalize_scaler(name: Optional[str]) -> Optional[str]:
    if name is None:
        return None
    return SCALERS.get(name.strip().lower().replace("-", "_"))


def _lookup(table: Dict[str, str], value: HyperValue) -> Optional[str]:
    return table.get(str(value).strip().lower())


def hyperparameter_problem(key: str, value: HyperValue) -> Optional[str]:
    """Why `value` is not acceptable for `key`, or None when it is."""
    if key in INTEGER_KEYS:
        if not isinstance(value, int) or value < (0 if key == "seed" else 1):
            return f"hyperparameter '{key}' needs a positive integer, got {value!r}"
    elif key in FLOAT_KEYS:
        if isinstance(value, str) or value <= 0:
            return f"hyperparameter '{key}' needs a positive number, got {value!r}"
        if key == "test_size" and value >= 1:
            return f"hyperparameter 'test_size' must be below 1, got {value!r}"
    elif key == "optimizer" and _lookup(OPTIMIZERS, value) is None:
        return f"unknown optimizer {value!r}"
    elif key == "loss" and _lookup(LOSSES, value) is None:
        return f"unknown loss {value!r}"
    elif key == "activation" and _lookup(ACTIVATIONS, value) is None:
        return f"unknown activation {value!r}"
    return None


def canonical_value(key: str, value: HyperValue) -> HyperValue:
    if key == "optimizer":
        return _lookup(OPTIMIZERS, value) or value
    if key == "loss":
        return _lookup(LOSSES, value) or value
    if key == "activation":
        return _lookup(ACTIVATIONS, value) or value
    if key in FLOAT_KEYS and isinstance(value, int):
        return float(value)
    return value


def task_for(labels: bool, label_type: Optional[str]) -> Optional[Task]:
    if not labels:
        return Task.CLUSTERING
    if label_type in NUMERIC_TYPES:
        return Task.REGRESSION
    if label_type in (BOOLEAN, STRING):
        return Task.CLASSIFICATION
    return None


@dataclass(frozen=True)
class DataAnalyticsSpec:
    """A data_analytics block with every property reference bound to its declared type."""

    name: str
    thing: str
    features: Tuple[Tuple[str, str], ...]
    labels: bool
    prediction_results: Optional[str]
    prediction_type: Optional[str]
    dataset: Optional[str]
    automl: bool
    sequential: Optional[bool]
    timestamps: bool
    scaler: Optional[str]
    algorithm: Optional[str]
    instance_name: Optional[str]
    hyperparameters: Tuple[Tuple[str, HyperValue], ...]
    training_results: Optional[str]
    blackbox_ml: bool
    blackbox_ml_model: Optional[str]
    blackbox_import_algorithm: Optional[str]
    dalib: Optional[str]
    declaration: ast.DataAnalytics = field(compare=False, repr=False, default=None)

    @property
    def family(self) -> Optional[Family]:
        if self.blackbox_ml:
            return normalize_family(self.blackbox_import_algorithm)
        return normalize_family(self.algorithm)

    @property
    def label_feature(self) -> Optional[Tuple[str, str]]:
        return self.features[-1] if self.labels and self.features else None

    @property
    def input_features(self) -> Tuple[Tuple[str, str], ...]:
        return self.features[:-1] if self.labels else self.features

    @property
    def task(self) -> Optional[Task]:
        label = self.label_feature
        return task_for(self.labels, label[1] if label else None)

    @property
    def scaler_name(self) -> str:
        return normalize_scaler(self.scaler) or "none"

    @property
    def is_sequential(self) -> bool:
        return bool(self.sequential)

    def hyperparameter(self, key: str, default: Optional[HyperValue] = None) -> Optional[HyperValue]:
        for k, v in self.hyperparameters:
            if k == key:
                return canonical_value(key, v)
        family = self.family
        if family is not None and key in DEFAULTS[family]:
            return DEFAULTS[family][key]
        return default

    @property
    def seed(self) -> int:
        return int(self.hyperparameter("seed", settings.SEED))

    @property
    def test_size(self) -> float:
        return float(self.hyperparameter("test_size", settings.TEST_SIZE))

    @property
    def k(self) -> int:
        return int(self.hyperparameter("k", 2))

    def effective_hyperparameters(self) -> Dict[str, HyperValue]:
        """Defaults overlaid with the declared values, keyed by canonical names."""
        family = self.family
        values: Dict[str, HyperValue] = dict(DEFAULTS[family]) if family is not None else {}
        for k, v in self.hyperparameters:
            values[k] = canonical_value(k, v)
        if family is Family.MLP and "loss" not in values:
            values["loss"] = "squared_error" if self.task is Task.REGRESSION else "cross_entropy"
        values.setdefault("seed", settings.SEED)
        return dict(sorted(values.items()))

    def with_changes(self, **changes) -> "DataAnalyticsSpec":
        fields = {name: getattr(self, name) for name in self.__dataclass_fields__}
        fields.update(changes)
        return DataAnalyticsSpec(**fields)


def prediction_type_ok(spec: DataAnalyticsSpec) -> bool:
    """Whether the prediction_results property can hold what the component predicts."""
    ptype, task = spec.prediction_type, spec.task
    if ptype is None or task is None:
        return False
    if task is Task.REGRESSION:
        return ptype in NUMERIC_TYPES
    if task is Task.CLASSIFICATION:
        label_type = spec.label_feature[1]
        return ptype == label_type or ptype == STRING
    # clustering yields a cluster id
    return ptype in INTEGER_TYPES or ptype == STRING or (ptype == BOOLEAN and spec.k == 2)
