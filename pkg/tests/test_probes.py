import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from ecgssl.errors import ConfigurationError, ShapeError
from ecgssl.probes import (
    ProbeKind,
    TrainedProbe,
    build_tree,
    fit_linear_svm,
    fit_logistic,
    fit_probe,
    fit_random_forest,
    predict,
    predict_proba,
    probe_from_json,
    probe_to_json,
    svm_objective,
)


def blobs(rng, n=40, d=3, sep=3.0):
    y = np.arange(n) % 2
    X = rng.standard_normal((n, d)) + sep * y[:, None]
    return X, y


def test_logistic_symmetric_two_points():
    X = np.array([[-1.0], [1.0]])
    p = fit_logistic(X, [0, 1], C=0.01)
    assert abs(p.params["b"]) < 1e-8
    np.testing.assert_array_equal(predict(p, X), [0, 1])


def test_logistic_matches_independent_optimizer(rng):
    X = rng.standard_normal((50, 4))
    y = (X @ [1.0, -2.0, 0.5, 0.0] + 0.3 * rng.standard_normal(50) > 0).astype(int)
    p = fit_logistic(X, y, C=1.0, tol=1e-10)

    def objective(th):
        t = X @ th[:4] + th[4]
        return 0.5 * th[:4] @ th[:4] + np.sum(np.logaddexp(0, t) - y * t)

    ref = minimize(objective, np.zeros(5), method="Nelder-Mead",
                   options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 20000, "maxfev": 20000})
    np.testing.assert_allclose(p.params["w"], ref.x[:4], atol=1e-3)
    assert p.params["b"] == pytest.approx(ref.x[4], abs=1e-3)


def test_logistic_separable_train_accuracy(rng):
    X, y = blobs(rng, sep=8.0)
    assert np.mean(predict(fit_logistic(X, y, C=10.0), X) == y) == 1.0


def test_logistic_zero_weights_half():
    p = TrainedProbe("logistic", {"w": np.zeros(3), "b": 0.0}, 3)
    np.testing.assert_array_equal(predict_proba(p, np.ones((4, 3))), 0.5)


@given(st.integers(0, 2**31))
def test_logistic_monotone_in_positive_feature(seed):
    r = np.random.default_rng(seed)
    w = r.standard_normal(3)
    w[0] = abs(w[0]) + 0.1
    p = TrainedProbe("logistic", {"w": w, "b": float(r.standard_normal())}, 3)
    x = r.standard_normal((1, 3))
    x2 = x.copy()
    x2[0, 0] += abs(r.standard_normal()) + 0.01
    assert predict_proba(p, x2)[0] >= predict_proba(p, x)[0]


def test_svm_margin_two_zero_hinge():
    X = np.array([[-2.0, 0.0], [-3.0, 1.0], [2.0, 0.0], [3.0, -1.0]])
    y = np.array([0, 0, 1, 1])
    p = fit_linear_svm(X, y, C=10.0, epochs=4000)
    margins = np.where(y == 1, 1, -1) * (X @ p.params["w"] + p.params["b"])
    assert np.all(margins >= 1 - 1e-3)


def test_svm_objective_near_grid_minimum(rng):
    X = rng.standard_normal((10, 2))
    y = (X[:, 0] + 0.5 * X[:, 1] + 0.4 * rng.standard_normal(10) > 0).astype(int)
    y_pm = np.where(y == 1, 1.0, -1.0)
    p = fit_linear_svm(X, y, C=1.0, epochs=5000)
    got = svm_objective(p.params["w"], p.params["b"], X, y_pm, 1.0)[0]
    g = np.linspace(-3, 3, 121)
    W1, W2, B = np.meshgrid(g, g, g, indexing="ij")
    W = np.stack([W1.ravel(), W2.ravel()], axis=1)
    scores = W @ X.T + B.ravel()[:, None]
    hinge = np.maximum(0.0, 1.0 - y_pm * scores).sum(axis=1)
    best = float(np.min(0.5 * (W * W).sum(axis=1) + hinge))
    assert got <= best * 1.01


def test_svm_label_flip_negates(rng):
    X, y = blobs(rng, n=20, d=2, sep=1.0)
    a = fit_linear_svm(X, y)
    b = fit_linear_svm(X, 1 - y)
    np.testing.assert_allclose(b.params["w"], -a.params["w"], atol=1e-3)


def test_pure_node_is_a_leaf(rng):
    tree = build_tree(rng.standard_normal((10, 2)), np.ones(10, dtype=int), rng)
    assert len(tree.feature) == 1
    assert tree.feature[0] == -1


def test_forest_deterministic_and_memorizes(rng):
    X = rng.standard_normal((30, 4))
    y = rng.integers(0, 2, 30)
    y[:2] = [0, 1]
    kind = ProbeKind(n_trees=10, max_depth=None, min_leaf=1, max_features=None, bootstrap=False)
    a, b = fit_random_forest(X, y, kind, seed=3), fit_random_forest(X, y, kind, seed=3)
    np.testing.assert_array_equal(predict_proba(a, X), predict_proba(b, X))
    assert np.mean(predict(a, X) == y) == 1.0


def test_forest_parallel_equals_serial(rng):
    X, y = blobs(rng, d=4, sep=1.0)
    serial = fit_random_forest(X, y, ProbeKind(n_trees=12), seed=1)
    parallel = fit_random_forest(X, y, ProbeKind(n_trees=12, n_jobs=3), seed=1)
    assert probe_to_json(serial) == probe_to_json(parallel)


def test_stump_on_training_point_is_pure():
    X = np.array([[0.0], [1.0]])
    kind = ProbeKind(n_trees=1, max_depth=1, min_leaf=1, max_features=None, bootstrap=False)
    p = fit_random_forest(X, [0, 1], kind, seed=0)
    assert set(predict_proba(p, X)) <= {0.0, 1.0}


@pytest.mark.parametrize("kind", ["logistic", "linear_svm", "random_forest"])
def test_proba_range_and_json_roundtrip(kind, rng):
    X, y = blobs(rng, sep=1.0)
    p = fit_probe(X, y, ProbeKind(kind=kind, n_trees=10, svm_epochs=300), seed=0)
    probs = predict_proba(p, rng.standard_normal((25, 3)) * 100)
    assert np.all((probs >= 0) & (probs <= 1))
    back = probe_from_json(probe_to_json(p))
    np.testing.assert_array_equal(predict_proba(back, X), predict_proba(p, X))


def test_probe_does_not_mutate_inputs(rng):
    X, y = blobs(rng)
    X0 = X.copy()
    fit_probe(X, y, ProbeKind(kind="logistic"))
    np.testing.assert_array_equal(X, X0)


def test_probe_errors(rng):
    X, y = blobs(rng)
    with pytest.raises(ConfigurationError):
        fit_probe(X, np.zeros(len(y)), ProbeKind(kind="logistic"))
    with pytest.raises(ConfigurationError):
        ProbeKind(kind="knn")
    p = fit_probe(X, y, ProbeKind(kind="logistic"))
    with pytest.raises(ShapeError):
        predict_proba(p, np.ones((2, 5)))
