"""
Tests for the from-scratch learners.
"""
import numpy as np
import pytest

from mlq.services.analytics import Family
from mlq.services.datasets import load_dataset
from mlq.services.learners import (
    DecisionTree,
    GaussianNaiveBayes,
    KMeans,
    LinearRegression,
    LogisticRegression,
    init_mlp,
    kmeans_inertia,
    logistic_loss_grad,
    make_learner,
    mlp_loss_grad,
)
from mlq.services.metrics import purity
from mlq.services.ml_errors import TrainingError
from mlq.services.synthetic import write_synthetic
from mlq.utils.preprocessing import fit_scaler
from conftest import APPLIANCE_FEATURES, make_spec


def load_preset(tmp_path, preset, features, rows, seed=10):
    path = tmp_path / f"{preset}.csv"
    write_synthetic(str(path), preset, seed=seed, rows=rows)
    return load_dataset(make_spec(features), str(path))


def test_ordinary_least_squares_recovers_a_line():
    X = np.arange(10, dtype=np.float64).reshape(-1, 1)
    learner = LinearRegression()
    learner.fit(X, 2.0 * X[:, 0] + 1.0)
    assert learner.params["coefficients"][0] == pytest.approx(2.0, abs=1e-6)
    assert learner.params["intercept"][0] == pytest.approx(1.0, abs=1e-6)


def test_line_preset(tmp_path):
    data = load_preset(tmp_path, "line", (("x", "Double"), ("y", "Double")), rows=200)
    learner = LinearRegression()
    learner.fit(data.X_train, data.y_train)
    assert learner.params["coefficients"][0] == pytest.approx(2.0, abs=1e-6)
    assert learner.params["intercept"][0] == pytest.approx(1.0, abs=1e-6)
    assert np.max(np.abs(learner.predict(data.X_test) - data.y_test)) < 1e-6


def test_singular_design_gets_a_note():
    X = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    learner = LinearRegression()
    learner.fit(X, np.array([1.0, 2.0, 3.0]))
    assert learner.notes
    assert np.allclose(learner.predict(X), [1.0, 2.0, 3.0], atol=1e-4)


def test_logistic_regression_on_separable_points(tmp_path):
    features = (("x1", "Double"), ("x2", "Double"), ("positive", "Boolean"))
    data = load_preset(tmp_path, "separable-2d", features, rows=500)
    y = np.asarray([1 if v == "true" else 0 for v in data.y], dtype=np.int64)
    learner = LogisticRegression({"lr": 0.05, "epochs": 300}, n_classes=2)
    history = learner.fit(data.X_train, y[:data.split])
    assert all(later <= earlier + 1e-12 for earlier, later in zip(history, history[1:]))
    accuracy = np.mean(learner.predict(data.X_test) == y[data.split:])
    assert accuracy >= 0.95


def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(20, 3))
    y = rng.integers(0, 2, size=20)
    weights, bias = rng.normal(size=3), rng.normal(size=1)
    _, grad_w, _ = logistic_loss_grad(weights, bias, X, y)
    h = 1e-6
    for j in range(3):
        step = np.zeros(3)
        step[j] = h
        numeric = (logistic_loss_grad(weights + step, bias, X, y)[0]
                   - logistic_loss_grad(weights - step, bias, X, y)[0]) / (2 * h)
        assert numeric == pytest.approx(grad_w[j], rel=1e-4, abs=1e-8)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("classification", [True, False])
def test_mlp_gradient_matches_finite_differences(seed, classification):
    """Backpropagated gradients agree with central differences."""
    rng = np.random.default_rng(seed)
    n, d, hidden, outputs = 6, 3, 4, 3 if classification else 1
    X = rng.normal(size=(n, d))
    targets = rng.integers(0, outputs, size=n) if classification else rng.normal(size=n)
    params = init_mlp(d, hidden, outputs, "sigmoid", rng)
    params["b1"] = rng.normal(size=hidden)
    params["b2"] = rng.normal(size=outputs)
    _, grads = mlp_loss_grad(params, X, targets, "sigmoid", classification)

    h = 1e-5
    for name, values in params.items():
        numeric = np.zeros_like(values)
        for index in np.ndindex(values.shape):
            plus = {k: v.copy() for k, v in params.items()}
            minus = {k: v.copy() for k, v in params.items()}
            plus[name][index] += h
            minus[name][index] -= h
            numeric[index] = (mlp_loss_grad(plus, X, targets, "sigmoid", classification)[0]
                              - mlp_loss_grad(minus, X, targets, "sigmoid", classification)[0]) / (2 * h)
        scale = max(np.max(np.abs(numeric)), np.max(np.abs(grads[name])), 1e-8)
        assert np.max(np.abs(numeric - grads[name])) / scale < 1e-4, name


def test_mlp_learns_separable_classes(tmp_path):
    features = (("x1", "Double"), ("x2", "Double"), ("positive", "Boolean"))
    data = load_preset(tmp_path, "separable-2d", features, rows=400)
    y = np.asarray([1 if v == "true" else 0 for v in data.y], dtype=np.int64)
    learner = make_learner(Family.MLP, {"hidden_size": 8, "epochs": 30, "lr": 0.05, "activation": "relu"}, n_classes=2)
    history = learner.fit(data.X_train, y[:data.split])
    assert len(history) == 30
    assert history[-1] < history[0]
    assert np.mean(learner.predict(data.X_test) == y[data.split:]) >= 0.9


def test_mlp_adam_runs_as_sgd():
    learner = make_learner(Family.MLP, {"optimizer": "adam", "hidden_size": 2, "epochs": 1}, n_classes=2)
    learner.fit(np.array([[0.0], [1.0]]), np.array([0, 1]))
    assert any("adam" in note for note in learner.notes)


@pytest.mark.parametrize("loss, n_classes", [("mse", 2), ("mean_squared_error", 3), ("log_loss", 0), ("sparse_categorical_crossentropy", 0)])
def test_mlp_rejects_a_loss_that_does_not_fit_the_task(loss, n_classes):
    learner = make_learner(Family.MLP, {"loss": loss, "hidden_size": 2, "epochs": 1}, n_classes=n_classes)
    with pytest.raises(TrainingError, match="loss"):
        learner.fit(np.array([[0.0], [1.0], [2.0]]), np.array([0, 1, 1]))


@pytest.mark.parametrize("loss, n_classes", [("MeanSquaredError", 0), ("categorical_crossentropy", 2)])
def test_mlp_accepts_any_spelling_of_the_matching_loss(loss, n_classes):
    X, y = np.array([[0.0], [1.0], [2.0]]), np.array([0, 1, 1])
    declared = make_learner(Family.MLP, {"loss": loss, "hidden_size": 2, "epochs": 2}, n_classes=n_classes)
    implied = make_learner(Family.MLP, {"hidden_size": 2, "epochs": 2}, n_classes=n_classes)
    assert declared.fit(X, y) == implied.fit(X, y)


def test_mlp_training_is_seeded():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(30, 2)), rng.normal(size=30)
    hyper = {"hidden_size": 5, "epochs": 5, "seed": 3}
    one, two = make_learner(Family.MLP, hyper), make_learner(Family.MLP, hyper)
    one.fit(X, y)
    two.fit(X, y)
    assert np.array_equal(one.predict(X), two.predict(X))


def test_naive_bayes_and_tree_on_separable_points(tmp_path):
    features = (("x1", "Double"), ("x2", "Double"), ("positive", "Boolean"))
    data = load_preset(tmp_path, "separable-2d", features, rows=400)
    y = np.asarray([1 if v == "true" else 0 for v in data.y], dtype=np.int64)
    for learner in (GaussianNaiveBayes(n_classes=2), DecisionTree({"max_depth": 3}, n_classes=2)):
        learner.fit(data.X_train, y[:data.split])
        assert np.mean(learner.predict(data.X_test) == y[data.split:]) >= 0.95


def test_tree_depth_is_bounded():
    X = np.arange(64, dtype=np.float64).reshape(-1, 1)
    y = np.arange(64) % 2
    tree = DecisionTree({"max_depth": 2}, n_classes=2)
    tree.fit(X, y)
    assert len(tree.params["feature"]) <= 7


def test_naive_bayes_needs_two_rows_per_class():
    with pytest.raises(TrainingError):
        GaussianNaiveBayes(n_classes=2).fit(np.array([[0.0], [1.0], [2.0]]), np.array([0, 0, 1]))


def test_kmeans_finds_the_washer_state(tmp_path):
    """Clusters of standardized readings line up with the washer-dryer state."""
    path = tmp_path / "cluster.csv"
    write_synthetic(str(path), "smarthome-cluster", seed=10, rows=1000)
    data = load_dataset(make_spec(APPLIANCE_FEATURES + (("washer_on", "Boolean"),)), str(path), test_size=0.0)
    X = fit_scaler("standard", data.X).transform(data.X)
    learner = KMeans({"k": 2, "seed": 10})
    history = learner.fit(X)
    assert history[-1] <= history[0]
    assert purity(data.y, learner.predict(X)) >= 0.9


def test_kmeans_centroids_are_canonically_ordered():
    X = np.array([[10.0, 10.0], [10.1, 10.0], [0.0, 0.0], [0.1, 0.0]])
    one = KMeans({"k": 2, "seed": 1})
    two = KMeans({"k": 2, "seed": 2})
    one.fit(X)
    two.fit(X)
    assert np.allclose(one.params["centroids"], two.params["centroids"])
    assert one.params["centroids"][0, 0] < one.params["centroids"][1, 0]


def test_kmeans_keeps_the_best_of_its_seeded_restarts():
    """The kept clustering is never worse than the first seeded start alone."""
    rng = np.random.default_rng(4)
    X = np.vstack([rng.normal(center, 0.3, size=(20, 2)) for center in ((0, 0), (4, 0), (0, 4), (4, 4))])
    learner = KMeans({"k": 4, "seed": 7})
    history = learner.fit(X)

    distinct = np.unique(X, axis=0)
    first = np.random.default_rng(7).choice(distinct.shape[0], size=4, replace=False)
    _, single = KMeans._lloyd(X, distinct[np.sort(first)])
    assert history[-1] == pytest.approx(kmeans_inertia(X, learner.params["centroids"]))
    assert history[-1] <= single[-1] + 1e-9


def test_kmeans_needs_enough_distinct_rows():
    with pytest.raises(TrainingError):
        KMeans({"k": 3}).fit(np.array([[1.0], [1.0], [2.0]]))
    with pytest.raises(TrainingError):
        KMeans({"k": 3}).fit(np.array([[1.0], [2.0]]))
