# mlq/services/learners.py
"""
From-scratch learners, one class per supported family.

Each learner keeps its fitted parameters in `self.params` (name -> ndarray) so
that a model document can rebuild it with `from_params`. Classification
learners work on class indices; the pipeline maps them to label values.
"""
import logging
from typing import Dict, List, Optional, Tuple, Type

import numpy as np

from .analytics import Family, canonical_value
from .ml_errors import TrainingError

logger = logging.getLogger(__name__)

RIDGE_JITTER = 1e-10
VARIANCE_FLOOR = 1e-9
KMEANS_MAX_ITERATIONS = 300
KMEANS_RESTARTS = 10

Params = Dict[str, np.ndarray]


class Learner:
    family: Family

    def __init__(self, hyperparameters: Optional[Dict] = None, n_classes: int = 0):
        self.hyper = dict(hyperparameters or {})
        self.n_classes = n_classes
        self.params: Params = {}
        self.notes: List[str] = []

    def fit(self, X: np.ndarray, y: Optional[np.ndarray]) -> List[float]:
        """Fit on X (and y); returns the loss history (may be empty)."""
        raise NotImplementedError

    def predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @classmethod
    def from_params(cls, params: Params, hyperparameters: Dict, n_classes: int) -> "Learner":
        learner = cls(hyperparameters, n_classes)
        learner.params = {k: np.asarray(v) for k, v in params.items()}
        return learner

    def _seed(self) -> int:
        return int(self.hyper.get("seed", 10))


# --- linear regression --------------------------------------------------------

class LinearRegression(Learner):
    family = Family.LINEAR_REGRESSION

    def fit(self, X, y):
        if X.shape[0] < 1:
            raise TrainingError("linear_regression needs at least one row")
        A = np.hstack([X, np.ones((X.shape[0], 1))])
        gram = A.T @ A
        if np.linalg.matrix_rank(gram) < gram.shape[0]:
            gram = gram + RIDGE_JITTER * np.eye(gram.shape[0])
            self.notes.append("singular Gram matrix, ridge jitter applied")
        solution = np.linalg.solve(gram, A.T @ np.asarray(y, dtype=np.float64))
        self.params = {"coefficients": solution[:-1].copy(), "intercept": solution[-1:].copy()}
        residual = A @ solution - y
        return [float(np.mean(residual ** 2))]

    def predict(self, X):
        return X @ self.params["coefficients"] + self.params["intercept"][0]


# --- logistic regression --------------------------------------------------------

def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _clip(p: np.ndarray) -> np.ndarray:
    return np.clip(p, 1e-12, 1.0)


def logistic_loss_grad(weights: np.ndarray, bias: np.ndarray, X: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """Mean log-loss and its gradient; binary when `weights` is 1-d, softmax otherwise."""
    n = X.shape[0]
    if weights.ndim == 1:
        p = sigmoid(X @ weights + bias[0])
        loss = -np.mean(y * np.log(_clip(p)) + (1 - y) * np.log(_clip(1 - p)))
        err = (p - y) / n
        return float(loss), X.T @ err, np.array([err.sum()])
    probs = softmax(X @ weights + bias)
    onehot = np.eye(weights.shape[1])[y]
    loss = -np.mean(np.sum(onehot * np.log(_clip(probs)), axis=1))
    err = (probs - onehot) / n
    return float(loss), X.T @ err, err.sum(axis=0)


class LogisticRegression(Learner):
    family = Family.LOGISTIC_REGRESSION

    def fit(self, X, y):
        if X.shape[0] < 1:
            raise TrainingError("logistic_regression needs at least one row")
        y = np.asarray(y, dtype=np.int64)
        d = X.shape[1]
        binary = self.n_classes <= 2
        weights = np.zeros(d) if binary else np.zeros((d, self.n_classes))
        bias = np.zeros(1) if binary else np.zeros(self.n_classes)
        lr = float(self.hyper.get("lr", 0.05))
        history = []
        for _ in range(int(self.hyper.get("epochs", 500))):
            loss, grad_w, grad_b = logistic_loss_grad(weights, bias, X, y)
            history.append(loss)
            weights = weights - lr * grad_w
            bias = bias - lr * grad_b
        history.append(logistic_loss_grad(weights, bias, X, y)[0])
        self.params = {"weights": weights, "bias": bias}
        return history

    def predict_proba(self, X):
        weights, bias = self.params["weights"], self.params["bias"]
        if weights.ndim == 1:
            p = sigmoid(X @ weights + bias[0])
            return np.column_stack([1 - p, p])
        return softmax(X @ weights + bias)

    def predict(self, X):
        if self.n_classes < 2:
            return np.zeros(X.shape[0], dtype=np.int64)
        return np.argmax(self.predict_proba(X), axis=1)


# --- Gaussian naive Bayes -------------------------------------------------------

class GaussianNaiveBayes(Learner):
    family = Family.GAUSSIAN_NAIVE_BAYES

    def fit(self, X, y):
        y = np.asarray(y, dtype=np.int64)
        counts = np.bincount(y, minlength=self.n_classes)
        if counts.min() < 2:
            raise TrainingError("gaussian_naive_bayes needs at least 2 rows per class")
        means = np.vstack([X[y == c].mean(axis=0) for c in range(self.n_classes)])
        variances = np.vstack([X[y == c].var(axis=0) for c in range(self.n_classes)])
        self.params = {
            "priors": counts / counts.sum(),
            "means": means,
            "variances": np.maximum(variances, VARIANCE_FLOOR),
        }
        return []

    def predict(self, X):
        means, variances = self.params["means"], self.params["variances"]
        log_prior = np.log(self.params["priors"])
        diff = X[:, None, :] - means[None, :, :]
        log_likelihood = -0.5 * np.sum(np.log(2 * np.pi * variances)[None] + diff ** 2 / variances[None], axis=2)
        return np.argmax(log_prior[None] + log_likelihood, axis=1)


# --- decision tree -----------------------------------------------------------------

def _gini(counts: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=-1, keepdims=True)
    safe = np.where(totals == 0, 1, totals)
    p = counts / safe
    return 1.0 - np.sum(p ** 2, axis=-1)


class DecisionTree(Learner):
    family = Family.DECISION_TREE

    def fit(self, X, y):
        if X.shape[0] < 1:
            raise TrainingError("decision_tree_classifier needs at least one row")
        y = np.asarray(y, dtype=np.int64)
        self._nodes: List[List] = []
        self._grow(X, y, depth=0)
        feature, threshold, left, right, leaf = zip(*self._nodes)
        self.params = {
            "feature": np.array(feature, dtype=np.int64),
            "threshold": np.array(threshold, dtype=np.float64),
            "left": np.array(left, dtype=np.int64),
            "right": np.array(right, dtype=np.int64),
            "leaf_class": np.array(leaf, dtype=np.int64),
        }
        return []

    def _best_split(self, X, y) -> Optional[Tuple[int, float]]:
        n = X.shape[0]
        parent = _gini(np.bincount(y, minlength=self.n_classes)[None])[0]
        best_gain, best = 0.0, None
        for j in range(X.shape[1]):
            order = np.argsort(X[:, j], kind="stable")
            xs, ys = X[order, j], y[order]
            onehot = np.eye(self.n_classes, dtype=np.int64)[ys]
            left_counts = np.cumsum(onehot, axis=0)[:-1]
            right_counts = left_counts[-1:] + onehot[-1] - left_counts
            valid = xs[1:] > xs[:-1]
            if not valid.any():
                continue
            n_left = np.arange(1, n)
            impurity = (n_left * _gini(left_counts) + (n - n_left) * _gini(right_counts)) / n
            gains = np.where(valid, parent - impurity, -np.inf)
            k = int(np.argmax(gains))
            if gains[k] > best_gain + 1e-12:
                best_gain, best = float(gains[k]), (j, float((xs[k] + xs[k + 1]) / 2.0))
        return best

    def _grow(self, X, y, depth: int) -> int:
        index = len(self._nodes)
        majority = int(np.argmax(np.bincount(y, minlength=self.n_classes)))
        self._nodes.append([-1, 0.0, -1, -1, majority])
        if depth >= int(self.hyper.get("max_depth", 5)) or np.unique(y).size == 1 or X.shape[0] < 2:
            return index
        split = self._best_split(X, y)
        if split is None:
            return index
        j, threshold = split
        mask = X[:, j] <= threshold
        left = self._grow(X[mask], y[mask], depth + 1)
        right = self._grow(X[~mask], y[~mask], depth + 1)
        self._nodes[index][:4] = [j, threshold, left, right]
        return index

    def predict(self, X):
        p = self.params
        out = np.empty(X.shape[0], dtype=np.int64)
        for i, row in enumerate(X):
            node = 0
            while p["left"][node] >= 0:
                node = p["left"][node] if row[p["feature"][node]] <= p["threshold"][node] else p["right"][node]
            out[i] = p["leaf_class"][node]
        return out


# --- multilayer perceptron ----------------------------------------------------------

def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    return np.maximum(z, 0.0) if activation == "relu" else sigmoid(z)


def _activation_grad(z: np.ndarray, h: np.ndarray, activation: str) -> np.ndarray:
    return (z > 0).astype(np.float64) if activation == "relu" else h * (1.0 - h)


def mlp_forward(params: Params, X: np.ndarray, activation: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    z1 = X @ params["W1"] + params["b1"]
    h = _activate(z1, activation)
    out = h @ params["W2"] + params["b2"]
    return z1, h, out


def mlp_loss_grad(params: Params, X: np.ndarray, targets: np.ndarray, activation: str,
                  classification: bool) -> Tuple[float, Params]:
    """Loss and gradients of a one-hidden-layer network.

    Classification uses softmax cross-entropy on integer targets; regression
    uses half mean squared error on a single output.
    """
    n = X.shape[0]
    z1, h, out = mlp_forward(params, X, activation)
    if classification:
        probs = softmax(out)
        onehot = np.eye(out.shape[1])[targets]
        loss = -np.mean(np.sum(onehot * np.log(_clip(probs)), axis=1))
        d_out = (probs - onehot) / n
    else:
        err = out[:, 0] - targets
        loss = 0.5 * np.mean(err ** 2)
        d_out = (err / n)[:, None]
    grads = {"W2": h.T @ d_out, "b2": d_out.sum(axis=0)}
    d_h = (d_out @ params["W2"].T) * _activation_grad(z1, h, activation)
    grads["W1"] = X.T @ d_h
    grads["b1"] = d_h.sum(axis=0)
    return float(loss), grads


def init_mlp(n_inputs: int, hidden: int, n_outputs: int, activation: str, rng: np.random.Generator) -> Params:
    gain = np.sqrt(2.0 / n_inputs) if activation == "relu" else np.sqrt(1.0 / n_inputs)
    return {
        "W1": rng.normal(0.0, gain, size=(n_inputs, hidden)),
        "b1": np.zeros(hidden),
        "W2": rng.normal(0.0, np.sqrt(1.0 / hidden), size=(hidden, n_outputs)),
        "b2": np.zeros(n_outputs),
    }


class MultilayerPerceptron(Learner):
    family = Family.MLP

    @property
    def classification(self) -> bool:
        return self.n_classes > 0

    def fit(self, X, y):
        if X.shape[0] < 1:
            raise TrainingError("nn_multilayer_perceptron needs at least one row")
        objective = "cross_entropy" if self.classification else "squared_error"
        loss = canonical_value("loss", self.hyper.get("loss", objective))
        if loss != objective:
            task = "classification" if self.classification else "regression"
            raise TrainingError(f"nn_multilayer_perceptron loss {loss!r} does not fit {task}; use {objective!r}")
        if self.hyper.get("optimizer") == "adam":
            self.notes.append("optimizer adam runs as plain stochastic gradient descent")
            logger.warning("MLP optimizer 'adam' mapped to SGD")
        activation = self.hyper.get("activation", "relu")
        rng = np.random.default_rng(self._seed())
        n_outputs = max(self.n_classes, 2) if self.classification else 1
        params = init_mlp(X.shape[1], int(self.hyper.get("hidden_size", 100)), n_outputs, activation, rng)
        if self.classification:
            targets = np.asarray(y, dtype=np.int64)
            y_mean, y_std = 0.0, 1.0
        else:
            y = np.asarray(y, dtype=np.float64)
            y_mean = float(y.mean())
            y_std = float(y.std()) or 1.0
            targets = (y - y_mean) / y_std

        lr = float(self.hyper.get("lr", 0.01))
        batch = int(self.hyper.get("batch_size", 32))
        history = []
        for _ in range(int(self.hyper.get("epochs", 50))):
            order = rng.permutation(X.shape[0])
            for start in range(0, X.shape[0], batch):
                idx = order[start:start + batch]
                _, grads = mlp_loss_grad(params, X[idx], targets[idx], activation, self.classification)
                for name in params:
                    params[name] = params[name] - lr * grads[name]
            history.append(mlp_loss_grad(params, X, targets, activation, self.classification)[0])
        params["target_scale"] = np.array([y_mean, y_std])
        self.params = params
        return history

    def predict(self, X):
        activation = self.hyper.get("activation", "relu")
        _, _, out = mlp_forward(self.params, X, activation)
        if self.classification:
            return np.argmax(out, axis=1)
        y_mean, y_std = self.params["target_scale"]
        return out[:, 0] * y_std + y_mean


# --- k-means ---------------------------------------------------------------------

def kmeans_inertia(X: np.ndarray, centroids: np.ndarray) -> float:
    d = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return float(d.min(axis=1).sum())


def nearest_centroid(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d, axis=1)


class KMeans(Learner):
    family = Family.K_MEANS

    def fit(self, X, y=None):
        k = int(self.hyper.get("k", 2))
        if X.shape[0] < k:
            raise TrainingError(f"k_means with k={k} needs at least {k} rows, got {X.shape[0]}")
        distinct = np.unique(X, axis=0)
        if distinct.shape[0] < k:
            raise TrainingError(f"k_means with k={k} needs {k} distinct rows, got {distinct.shape[0]}")
        rng = np.random.default_rng(self._seed())

        best = None
        for _ in range(KMEANS_RESTARTS):
            start = distinct[np.sort(rng.choice(distinct.shape[0], size=k, replace=False))].astype(np.float64)
            centroids, history = self._lloyd(X, start)
            if best is None or history[-1] < best[1][-1]:
                best = (centroids, history)
        centroids, history = best

        norms = np.linalg.norm(centroids, axis=1)
        order = np.lexsort(tuple(centroids[:, j] for j in reversed(range(centroids.shape[1]))) + (norms,))
        self.params = {"centroids": centroids[order]}
        history.append(kmeans_inertia(X, self.params["centroids"]))
        return history

    @staticmethod
    def _lloyd(X: np.ndarray, centroids: np.ndarray) -> Tuple[np.ndarray, List[float]]:
        assignment = None
        history = []
        for iteration in range(KMEANS_MAX_ITERATIONS):
            new_assignment = nearest_centroid(X, centroids)
            history.append(kmeans_inertia(X, centroids))
            if assignment is not None and np.array_equal(new_assignment, assignment):
                break
            assignment = new_assignment
            for c in range(centroids.shape[0]):
                members = X[assignment == c]
                if members.shape[0]:
                    centroids[c] = members.mean(axis=0)
        logger.debug(f"k_means run stopped after {iteration + 1} iteration(s)")
        return centroids, history

    def predict(self, X):
        return nearest_centroid(X, self.params["centroids"])


LEARNERS: Dict[Family, Type[Learner]] = {
    Family.LINEAR_REGRESSION: LinearRegression,
    Family.LOGISTIC_REGRESSION: LogisticRegression,
    Family.GAUSSIAN_NAIVE_BAYES: GaussianNaiveBayes,
    Family.DECISION_TREE: DecisionTree,
    Family.MLP: MultilayerPerceptron,
    Family.K_MEANS: KMeans,
}


def make_learner(family: Family, hyperparameters: Dict, n_classes: int = 0) -> Learner:
    return LEARNERS[family](hyperparameters, n_classes)
