"""Shallow classifiers fitted on frozen embeddings.

Three probes: L2-regularized logistic regression (gradient descent with
backtracking), a linear SVM (averaged subgradient descent on the hinge
objective) and a random forest of Gini CART trees.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ecgssl.errors import ConfigurationError, DataError, ShapeError

KINDS = ("logistic", "linear_svm", "random_forest")


@dataclass(frozen=True)
class ProbeKind:
    kind: str = "random_forest"
    C: float = 1.0
    max_iter: int = 5000
    svm_C: float = 1.0
    svm_epochs: int = 3000
    n_trees: int = 100
    max_depth: int | None = 8
    min_leaf: int = 2
    max_features: str | int | None = "sqrt"
    bootstrap: bool = True
    standardize: bool = True
    n_jobs: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown probe {self.kind!r}; choose from {KINDS}")
        if self.C <= 0 or self.svm_C <= 0:
            raise ConfigurationError("regularization constants must be positive")
        if self.n_trees < 1 or self.min_leaf < 1:
            raise ConfigurationError("forest needs n_trees >= 1 and min_leaf >= 1")


@dataclass
class TrainedProbe:
    kind: str
    params: dict
    n_features: int
    meta: dict = field(default_factory=dict)
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"probe expects {self.n_features} features, got {X.shape}")
        if self.mean is not None:
            X = (X - self.mean) / self.scale
        return X


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64).reshape(-1)
    if X.ndim != 2 or len(X) != len(y):
        raise ShapeError(f"X {X.shape} and y {y.shape} disagree")
    if not np.all(np.isfinite(X)):
        raise DataError("probe inputs must be finite")
    if not set(np.unique(y)) <= {0, 1}:
        raise DataError("labels must be 0/1")
    if len(np.unique(y)) < 2:
        raise ConfigurationError("probe fitting needs both classes present")
    return X, y


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


# ---------------------------------------------------------------- logistic


def logistic_objective(w, b, X, y, C):
    """0.5*||w||^2 + C * sum of negative log-likelihoods, with gradients."""
    t = X @ w + b
    # log(1 + e^t) - y t, computed stably
    nll = np.logaddexp(0.0, t) - y * t
    r = C * (_sigmoid(t) - y)
    value = 0.5 * float(w @ w) + C * float(nll.sum())
    return value, w + X.T @ r, float(r.sum())


def fit_logistic(X, y, C=1.0, max_iter=5000, tol=1e-6):
    X, y = _check_xy(X, y)
    yf = y.astype(np.float64)
    w = np.zeros(X.shape[1])
    b = 0.0
    step = 1.0
    f, gw, gb = logistic_objective(w, b, X, yf, C)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gnorm2 = float(gw @ gw) + gb * gb
        if math.sqrt(gnorm2) <= tol:
            converged = True
            break
        step *= 2.0
        while True:
            w_new, b_new = w - step * gw, b - step * gb
            f_new, gw_new, gb_new = logistic_objective(w_new, b_new, X, yf, C)
            if f_new <= f - 0.5 * step * gnorm2 or step < 1e-20:
                break
            step *= 0.5
        w, b, f, gw, gb = w_new, b_new, f_new, gw_new, gb_new
    else:
        converged = math.sqrt(float(gw @ gw) + gb * gb) <= tol
    return TrainedProbe(
        "logistic", {"w": w, "b": b}, X.shape[1],
        {"iterations": it, "converged": converged, "C": C, "objective": f},
    )


# ---------------------------------------------------------------- linear SVM


def svm_objective(w, b, X, y_pm, C):
    """0.5*||w||^2 + C * sum hinge(1 - y (w.x + b)) and one subgradient."""
    margins = y_pm * (X @ w + b)
    active = margins < 1.0
    value = 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - margins).sum())
    gw = w - C * (X[active].T @ y_pm[active])
    gb = -C * float(y_pm[active].sum())
    return value, gw, gb


def fit_linear_svm(X, y, C=1.0, epochs=3000):
    """Full-batch subgradient descent with step 1/(t * L) and suffix-averaged
    iterates; returns whichever of the averaged or best visited point has
    the lower objective."""
    X, y = _check_xy(X, y)
    y_pm = np.where(y == 1, 1.0, -1.0)
    n, d = X.shape
    lip = 1.0 + C * n * max(1.0, float(np.max(np.abs(X))) if X.size else 1.0)
    w = np.zeros(d)
    b = 0.0
    avg_w, avg_b, n_avg = np.zeros(d), 0.0, 0
    best = (math.inf, w.copy(), b)
    start_avg = epochs // 2
    for t in range(1, epochs + 1):
        f, gw, gb = svm_objective(w, b, X, y_pm, C)
        if f < best[0]:
            best = (f, w.copy(), b)
        eta = 1.0 / (t + lip)
        w = w - eta * gw
        b = b - eta * gb
        if t > start_avg:
            n_avg += 1
            avg_w += (w - avg_w) / n_avg
            avg_b += (b - avg_b) / n_avg
    f_avg = svm_objective(avg_w, avg_b, X, y_pm, C)[0]
    f_last = svm_objective(w, b, X, y_pm, C)[0]
    if f_last < best[0]:
        best = (f_last, w.copy(), b)
    if f_avg <= best[0]:
        best = (f_avg, avg_w, avg_b)
    f, w, b = best
    return TrainedProbe(
        "linear_svm", {"w": w, "b": float(b), "platt_a": 1.0, "platt_b": 0.0}, d,
        {"epochs": epochs, "C": C, "objective": f},
    )


# ---------------------------------------------------------------- random forest


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # class-1 frequency at each node

    def apply(self, X):
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[node]
            internal = f >= 0
            if not internal.any():
                return node
            rows = np.flatnonzero(internal)
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def predict(self, X):
        return self.value[self.apply(X)]

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64),
        )


def gini(counts_pos, n):
    p = counts_pos / n
    return 2.0 * p * (1.0 - p)


def _best_split(Xn, yn, feats, min_leaf):
    """Best (weighted Gini, feature, threshold) over candidate features."""
    n = len(yn)
    cols = Xn[:, feats]
    order = np.argsort(cols, axis=0, kind="stable")
    xs = np.take_along_axis(cols, order, axis=0)
    ys = yn[order]
    left_pos = np.cumsum(ys, axis=0)[:-1]
    n_left = np.arange(1, n)[:, None].astype(np.float64)
    n_right = n - n_left
    right_pos = ys.sum(axis=0) - left_pos
    impurity = (
        2.0 * left_pos * (n_left - left_pos) / n_left
        + 2.0 * right_pos * (n_right - right_pos) / n_right
    )
    valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    impurity = np.where(valid, impurity, np.inf)
    flat = int(np.argmin(impurity))
    pos, j = divmod(flat, len(feats))
    thr = 0.5 * (xs[pos, j] + xs[pos + 1, j])
    if not thr < xs[pos + 1, j]:  # midpoint rounded onto the upper value
        thr = xs[pos, j]
    return impurity[pos, j], int(feats[j]), float(thr)


def build_tree(X, y, rng, max_depth=8, min_leaf=2, max_features=None):
    """Grow one Gini CART tree; pure nodes are never split."""
    d = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        pos = yn.sum()
        if pos == 0 or pos == len(yn):
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        if len(idx) < 2 * min_leaf:
            continue
        k = d if max_features is None else max_features
        feats = np.sort(rng.choice(d, size=k, replace=False)) if k < d else np.arange(d)
        found = _best_split(X[idx], yn, feats, min_leaf)
        if found is None:
            continue
        _, f, thr = found
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=np.float64),
    )


def _n_split_features(max_features, d):
    if max_features is None:
        return d
    if max_features == "sqrt":
        return max(1, int(math.isqrt(d)))
    if max_features == "log2":
        return max(1, int(math.log2(d)))
    k = int(max_features)
    if not 1 <= k <= d:
        raise ConfigurationError(f"max_features {k} outside [1, {d}]")
    return k


def fit_random_forest(X, y, kind=None, seed=0):
    """Bootstrap ensemble of CART trees; tree t uses the t-th child of the
    root seed, so serial and threaded fits agree."""
    kind = kind or ProbeKind()
    X, y = _check_xy(X, y)
    k = _n_split_features(kind.max_features, X.shape[1])
    seeds = np.random.SeedSequence(seed).spawn(kind.n_trees)

    def grow(ss):
        rng = np.random.default_rng(ss)
        idx = rng.integers(0, len(y), size=len(y)) if kind.bootstrap else np.arange(len(y))
        return build_tree(X[idx], y[idx], rng, kind.max_depth, kind.min_leaf, k)

    if kind.n_jobs > 1:
        with ThreadPoolExecutor(kind.n_jobs) as pool:
            trees = list(pool.map(grow, seeds))
    else:
        trees = [grow(ss) for ss in seeds]
    return TrainedProbe(
        "random_forest", {"trees": trees}, X.shape[1],
        {"seed": seed, "n_trees": kind.n_trees, "max_features": k},
    )


# ---------------------------------------------------------------- common surface


def fit_probe(X, y, kind=None, seed=0):
    """Fit the configured probe, standardizing features first if requested."""
    kind = kind or ProbeKind()
    X = np.asarray(X, dtype=np.float64)
    mean = scale = None
    Xt = X
    if kind.standardize and kind.kind != "random_forest":
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 1e-12, scale, 1.0)
        Xt = (X - mean) / scale
    if kind.kind == "logistic":
        probe = fit_logistic(Xt, y, kind.C, kind.max_iter)
    elif kind.kind == "linear_svm":
        probe = fit_linear_svm(Xt, y, kind.svm_C, kind.svm_epochs)
    else:
        probe = fit_random_forest(Xt, y, kind, seed)
    probe.mean, probe.scale = mean, scale
    probe.meta["kind_config"] = asdict(kind)
    return probe


def predict_proba(probe, X):
    """Class-1 probability per row."""
    X = probe.transform(X)
    if probe.kind == "logistic":
        return _sigmoid(X @ probe.params["w"] + probe.params["b"])
    if probe.kind == "linear_svm":
        margin = X @ probe.params["w"] + probe.params["b"]
        return _sigmoid(probe.params["platt_a"] * margin + probe.params["platt_b"])
    trees = probe.params["trees"]
    return np.mean([t.predict(X) for t in trees], axis=0)


def predict(probe, X, threshold=0.5):
    return (predict_proba(probe, X) >= threshold).astype(np.int64)


def probe_to_json(probe):
    params = {}
    for k, v in probe.params.items():
        if k == "trees":
            params[k] = [t.to_dict() for t in v]
        else:
            params[k] = np.asarray(v).tolist()
    doc = {
        "kind": probe.kind,
        "n_features": probe.n_features,
        "params": params,
        "meta": probe.meta,
        "mean": None if probe.mean is None else probe.mean.tolist(),
        "scale": None if probe.scale is None else probe.scale.tolist(),
    }
    return json.dumps(doc, sort_keys=True)


def probe_from_json(text):
    doc = json.loads(text)
    params = {}
    for k, v in doc["params"].items():
        if k == "trees":
            params[k] = [Tree.from_dict(t) for t in v]
        elif k == "w":
            params[k] = np.asarray(v, dtype=np.float64)
        else:
            params[k] = float(v)
    return TrainedProbe(
        doc["kind"], params, doc["n_features"], doc["meta"],
        None if doc["mean"] is None else np.asarray(doc["mean"]),
        None if doc["scale"] is None else np.asarray(doc["scale"]),
    )
