"""Built-in transformer and estimator catalog.

Everything here is numpy-only and deterministic given its seed. Transformers
expose fit(X, y) / transform(X); estimators expose fit(X, y) / predict_proba(X)
returning (n, n_classes) rows that sum to 1. Long-running fits poll an
optional ``abort_check`` callback so evaluations can honor deadlines.

Each component serializes to a JSON-safe state dict (``to_state`` /
``component_from_state``) so trained models round-trip through the model file.
"""

from __future__ import annotations

import math

import numpy as np

from .space import ComponentSpec, Domain, SearchSpace

__all__ = [
    "EvalAborted",
    "StandardScaler",
    "MinMaxScaler",
    "VarianceThreshold",
    "SelectKBest",
    "KNearestNeighbors",
    "DecisionTree",
    "RandomForest",
    "LogisticRegression",
    "GaussianNB",
    "logreg_loss_grad",
    "anova_f_scores",
    "build_component",
    "register_builder",
    "component_from_state",
    "default_space",
]


class EvalAborted(Exception):
    """Raised by abort_check hooks when an evaluation ran out of time."""


class _Component:
    abort_check = None  # set by the evaluator; callable raising EvalAborted

    def _poll(self):
        if self.abort_check is not None:
            self.abort_check()


# ---------------------------------------------------------------------------
# Transformers

class StandardScaler(_Component):
    """Zero mean, unit variance per column; zero-variance columns pass through."""

    def fit(self, X, y=None):
        self.mean_ = X.mean(axis=0) if X.size else np.zeros(X.shape[1])
        var = X.var(axis=0) if X.size else np.zeros(X.shape[1])
        self.active_ = var > 0.0
        self.scale_ = np.where(self.active_, np.sqrt(np.where(var > 0, var, 1.0)), 1.0)
        return self

    def transform(self, X):
        out = X.astype(float).copy()
        out[:, self.active_] = (X[:, self.active_] - self.mean_[self.active_]) \
            / self.scale_[self.active_]
        return out

    def to_state(self):
        return {"type": "standard_scaler", "mean": self.mean_.tolist(),
                "scale": self.scale_.tolist(), "active": self.active_.tolist()}

    @classmethod
    def from_state(cls, state):
        obj = cls()
        obj.mean_ = np.array(state["mean"])
        obj.scale_ = np.array(state["scale"])
        obj.active_ = np.array(state["active"], dtype=bool)
        return obj


class MinMaxScaler(_Component):
    """Map each column to [0, 1]; constant columns pass through."""

    def fit(self, X, y=None):
        self.min_ = X.min(axis=0) if X.size else np.zeros(X.shape[1])
        rng = (X.max(axis=0) - self.min_) if X.size else np.zeros(X.shape[1])
        self.active_ = rng > 0.0
        self.range_ = np.where(self.active_, np.where(rng > 0, rng, 1.0), 1.0)
        return self

    def transform(self, X):
        out = X.astype(float).copy()
        out[:, self.active_] = (X[:, self.active_] - self.min_[self.active_]) \
            / self.range_[self.active_]
        return out

    def to_state(self):
        return {"type": "minmax_scaler", "min": self.min_.tolist(),
                "range": self.range_.tolist(), "active": self.active_.tolist()}

    @classmethod
    def from_state(cls, state):
        obj = cls()
        obj.min_ = np.array(state["min"])
        obj.range_ = np.array(state["range"])
        obj.active_ = np.array(state["active"], dtype=bool)
        return obj


class VarianceThreshold(_Component):
    """Drop columns whose variance is below the threshold."""

    def __init__(self, threshold=0.0):
        self.threshold = float(threshold)

    def fit(self, X, y=None):
        var = X.var(axis=0) if X.size else np.zeros(X.shape[1])
        self.keep_ = var >= self.threshold
        return self

    def transform(self, X):
        return X[:, self.keep_]

    def to_state(self):
        return {"type": "variance_threshold", "threshold": self.threshold,
                "keep": self.keep_.tolist()}

    @classmethod
    def from_state(cls, state):
        obj = cls(state["threshold"])
        obj.keep_ = np.array(state["keep"], dtype=bool)
        return obj


def anova_f_scores(X, y, n_classes) -> np.ndarray:
    """One-way ANOVA F statistic per column (between-class over within-class
    mean squares). Zero within-variance gives inf when the between part is
    positive, else 0."""
    n = X.shape[0]
    overall = X.mean(axis=0)
    ss_between = np.zeros(X.shape[1])
    ss_within = np.zeros(X.shape[1])
    groups = 0
    for c in range(n_classes):
        rows = X[y == c]
        if rows.shape[0] == 0:
            continue
        groups += 1
        mean_c = rows.mean(axis=0)
        ss_between += rows.shape[0] * (mean_c - overall) ** 2
        ss_within += ((rows - mean_c) ** 2).sum(axis=0)
    df_between = max(groups - 1, 1)
    df_within = max(n - groups, 1)
    ms_between = ss_between / df_between
    ms_within = ss_within / df_within
    with np.errstate(divide="ignore", invalid="ignore"):
        f = ms_between / ms_within
    f = np.where(ms_within == 0.0, np.where(ms_between > 0.0, np.inf, 0.0), f)
    return f


class SelectKBest(_Component):
    """Keep the top-k columns by ANOVA F statistic (ties: lower column index)."""

    def __init__(self, k=10):
        self.k = int(k)

    def fit(self, X, y):
        d = X.shape[1]
        k = max(1, min(self.k, d)) if d else 0
        if d == 0:
            self.keep_ = np.array([], dtype=np.int64)
            return self
        scores = anova_f_scores(X, y, int(y.max()) + 1 if len(y) else 1)
        order = np.argsort(-scores, kind="stable")
        self.keep_ = np.sort(order[:k])
        return self

    def transform(self, X):
        return X[:, self.keep_]

    def to_state(self):
        return {"type": "select_k_best", "k": self.k, "keep": self.keep_.tolist()}

    @classmethod
    def from_state(cls, state):
        obj = cls(state["k"])
        obj.keep_ = np.array(state["keep"], dtype=np.int64)
        return obj


# ---------------------------------------------------------------------------
# Estimators

def _normalize_rows(p):
    totals = p.sum(axis=1, keepdims=True)
    totals[totals == 0.0] = 1.0
    return p / totals


class KNearestNeighbors(_Component):
    """k-NN with uniform or inverse-distance vote. Neighbor ties break by the
    lower training-row index, so predictions are deterministic."""

    def __init__(self, n_classes, k=5, weights="uniform"):
        self.n_classes = int(n_classes)
        self.k = int(k)
        self.weights = weights

    def fit(self, X, y):
        self.X_ = X.astype(float)
        self.y_ = y.astype(np.int64)
        return self

    def predict_proba(self, X):
        n_train = self.X_.shape[0]
        k = max(1, min(self.k, n_train))
        d2 = ((X[:, None, :] - self.X_[None, :, :]) ** 2).sum(axis=2) \
            if X.shape[1] else np.zeros((X.shape[0], n_train))
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        proba = np.zeros((X.shape[0], self.n_classes))
        for i in range(X.shape[0]):
            nbrs = order[i]
            dist = np.sqrt(d2[i, nbrs])
            if self.weights == "distance":
                zero = dist <= 1e-12
                w = np.where(zero, 1.0, 0.0) if zero.any() else 1.0 / dist
            else:
                w = np.ones(k)
            np.add.at(proba[i], self.y_[nbrs], w)
        return _normalize_rows(proba)

    def to_state(self):
        return {"type": "knn", "n_classes": self.n_classes, "k": self.k,
                "weights": self.weights, "X": self.X_.tolist(), "y": self.y_.tolist()}

    @classmethod
    def from_state(cls, state):
        obj = cls(state["n_classes"], state["k"], state["weights"])
        obj.X_ = np.array(state["X"], dtype=float).reshape(len(state["y"]), -1)
        obj.y_ = np.array(state["y"], dtype=np.int64)
        return obj


def _gini_split(values, y_sorted, n_classes):
    """Best (threshold, impurity) for one pre-sorted feature, or None."""
    n = len(values)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y_sorted] = 1.0
    left = np.cumsum(onehot, axis=0)  # class counts left of each cut
    total = left[-1]
    cuts = np.flatnonzero(values[1:] > values[:-1]) + 1  # split before index s
    if len(cuts) == 0:
        return None
    nl = cuts.astype(float)
    nr = n - nl
    lc = left[cuts - 1]
    rc = total - lc
    gini_l = 1.0 - ((lc / nl[:, None]) ** 2).sum(axis=1)
    gini_r = 1.0 - ((rc / nr[:, None]) ** 2).sum(axis=1)
    weighted = (nl * gini_l + nr * gini_r) / n
    best = int(np.argmin(weighted))  # first minimum wins
    s = cuts[best]
    return (values[s - 1] + values[s]) / 2.0, float(weighted[best])


class DecisionTree(_Component):
    """CART with gini impurity. Splits scan features in index order and keep
    the first strictly-better candidate, so the tree is deterministic."""

    def __init__(self, n_classes, max_depth=10, min_samples_split=2):
        self.n_classes = int(n_classes)
        self.max_depth = int(max_depth)
        self.min_samples_split = int(min_samples_split)

    def fit(self, X, y):
        self._nodes_visited = 0
        self.root_ = self._grow(X.astype(float), y.astype(np.int64), 0)
        return self

    def _leaf(self, y):
        counts = np.bincount(y, minlength=self.n_classes).astype(float)
        return {"leaf": (counts / counts.sum()).tolist()}

    def _grow(self, X, y, depth):
        self._nodes_visited += 1
        if self._nodes_visited % 64 == 0:
            self._poll()
        n = X.shape[0]
        if depth >= self.max_depth or n < self.min_samples_split \
                or len(np.unique(y)) == 1 or X.shape[1] == 0:
            return self._leaf(y)
        best = None  # (impurity, feature, threshold)
        for j in range(X.shape[1]):
            order = np.argsort(X[:, j], kind="stable")
            found = _gini_split(X[order, j], y[order], self.n_classes)
            if found is None:
                continue
            threshold, impurity = found
            if best is None or impurity < best[0]:
                best = (impurity, j, threshold)
        if best is None:
            return self._leaf(y)
        _, j, threshold = best
        mask = X[:, j] <= threshold
        return {
            "feature": j,
            "threshold": threshold,
            "left": self._grow(X[mask], y[mask], depth + 1),
            "right": self._grow(X[~mask], y[~mask], depth + 1),
        }

    def predict_proba(self, X):
        out = np.zeros((X.shape[0], self.n_classes))
        for i, row in enumerate(X):
            node = self.root_
            while "leaf" not in node:
                node = node["left"] if row[node["feature"]] <= node["threshold"] \
                    else node["right"]
            out[i] = node["leaf"]
        return out

    def to_state(self):
        return {"type": "decision_tree", "n_classes": self.n_classes,
                "max_depth": self.max_depth, "min_samples_split": self.min_samples_split,
                "root": self.root_}

    @classmethod
    def from_state(cls, state):
        obj = cls(state["n_classes"], state["max_depth"], state["min_samples_split"])
        obj.root_ = state["root"]
        return obj


class RandomForest(_Component):
    """Bagged CART trees on bootstrap samples with sqrt(d) feature subsets."""

    def __init__(self, n_classes, n_estimators=25, max_depth=8, seed=0):
        self.n_classes = int(n_classes)
        self.n_estimators = int(n_estimators)
        self.max_depth = int(max_depth)
        self.seed = int(seed)

    def fit(self, X, y):
        n, d = X.shape
        self.trees_ = []
        for t in range(self.n_estimators):
            self._poll()
            rng = np.random.RandomState((self.seed + 0x9E37 * t) % (2 ** 31))
            boot = rng.randint(0, n, size=n)
            n_feats = max(1, int(round(math.sqrt(d)))) if d else 0
            feats = np.sort(rng.choice(d, size=n_feats, replace=False)) if d else \
                np.array([], dtype=np.int64)
            tree = DecisionTree(self.n_classes, self.max_depth, 2)
            tree.abort_check = self.abort_check
            tree.fit(X[boot][:, feats], y[boot])
            self.trees_.append((feats, tree))
        return self

    def predict_proba(self, X):
        acc = np.zeros((X.shape[0], self.n_classes))
        for feats, tree in self.trees_:
            acc += tree.predict_proba(X[:, feats])
        return _normalize_rows(acc)

    def to_state(self):
        return {"type": "random_forest", "n_classes": self.n_classes,
                "n_estimators": self.n_estimators, "max_depth": self.max_depth,
                "seed": self.seed,
                "trees": [{"feats": f.tolist(), "tree": t.to_state()} for f, t in self.trees_]}

    @classmethod
    def from_state(cls, state):
        obj = cls(state["n_classes"], state["n_estimators"], state["max_depth"], state["seed"])
        obj.trees_ = [(np.array(t["feats"], dtype=np.int64),
                       DecisionTree.from_state(t["tree"])) for t in state["trees"]]
        return obj


def logreg_loss_grad(theta, X, y_onehot, l2):
    """Mean softmax cross-entropy with L2 on the weights (bias row excluded).

    ``theta`` has shape (d + 1, c); the last row is the bias. Returns
    (loss, gradient) with the gradient the exact derivative of the loss, which
    the test suite checks against central finite differences.
    """
    n = X.shape[0]
    xb = np.hstack([X, np.ones((n, 1))])
    logits = xb @ theta
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    probs = exp / exp.sum(axis=1, keepdims=True)
    log_probs = logits - np.log(exp.sum(axis=1, keepdims=True))
    loss = -(y_onehot * log_probs).sum() / n
    loss += 0.5 * l2 * (theta[:-1] ** 2).sum()
    grad = xb.T @ (probs - y_onehot) / n
    grad[:-1] += l2 * theta[:-1]
    return loss, grad


class LogisticRegression(_Component):
    """Multinomial logistic regression: full-batch gradient descent with a
    fixed iteration cap. Features are standardized internally so the fixed
    learning rate stays stable across datasets."""

    def __init__(self, n_classes, l2=1e-2, iterations=300, learning_rate=0.5):
        self.n_classes = int(n_classes)
        self.l2 = float(l2)
        self.iterations = int(iterations)
        self.learning_rate = float(learning_rate)

    def fit(self, X, y):
        mean = X.mean(axis=0) if X.size else np.zeros(X.shape[1])
        std = X.std(axis=0) if X.size else np.zeros(X.shape[1])
        self.mean_ = mean
        self.scale_ = np.where(std > 0, std, 1.0)
        xs = (X - self.mean_) / self.scale_
        onehot = np.zeros((X.shape[0], self.n_classes))
        onehot[np.arange(X.shape[0]), y] = 1.0
        theta = np.zeros((X.shape[1] + 1, self.n_classes))
        # Step size bounded by both curvature terms: the L2 part diverges when
        # lr * l2 > 2, the data part when lr exceeds ~4 / mean row norm^2.
        lr = min(self.learning_rate, 1.0 / (1.0 + self.l2),
                 4.0 / (1.0 + X.shape[1]))
        for it in range(self.iterations):
            if it % 25 == 0:
                self._poll()
            _, grad = logreg_loss_grad(theta, xs, onehot, self.l2)
            theta -= lr * grad
        self.theta_ = theta
        return self

    def predict_proba(self, X):
        xs = (X - self.mean_) / self.scale_
        logits = np.hstack([xs, np.ones((X.shape[0], 1))]) @ self.theta_
        logits -= logits.max(axis=1, keepdims=True)
        exp = np.exp(logits)
        return exp / exp.sum(axis=1, keepdims=True)

    def to_state(self):
        return {"type": "logistic_regression", "n_classes": self.n_classes,
                "l2": self.l2, "iterations": self.iterations,
                "learning_rate": self.learning_rate, "mean": self.mean_.tolist(),
                "scale": self.scale_.tolist(), "theta": self.theta_.tolist()}

    @classmethod
    def from_state(cls, state):
        obj = cls(state["n_classes"], state["l2"], state["iterations"],
                  state["learning_rate"])
        obj.mean_ = np.array(state["mean"])
        obj.scale_ = np.array(state["scale"])
        obj.theta_ = np.array(state["theta"]).reshape(len(state["mean"]) + 1,
                                                      state["n_classes"])
        return obj


class GaussianNB(_Component):
    """Gaussian naive Bayes with additive variance smoothing."""

    def __init__(self, n_classes, var_smoothing=1e-9):
        self.n_classes = int(n_classes)
        self.var_smoothing = float(var_smoothing)

    def fit(self, X, y):
        n, d = X.shape
        self.priors_ = np.bincount(y, minlength=self.n_classes) / max(n, 1)
        self.means_ = np.zeros((self.n_classes, d))
        self.vars_ = np.ones((self.n_classes, d))
        for c in range(self.n_classes):
            rows = X[y == c]
            if rows.shape[0] == 0:
                continue
            self.means_[c] = rows.mean(axis=0)
            self.vars_[c] = rows.var(axis=0) + self.var_smoothing
        self.vars_ = np.maximum(self.vars_, 1e-300)
        return self

    def predict_proba(self, X):
        log_joint = np.full((X.shape[0], self.n_classes), -np.inf)
        for c in range(self.n_classes):
            if self.priors_[c] == 0.0:
                continue
            ll = -0.5 * (np.log(2 * np.pi * self.vars_[c])
                         + (X - self.means_[c]) ** 2 / self.vars_[c]).sum(axis=1)
            log_joint[:, c] = math.log(self.priors_[c]) + ll
        log_joint -= log_joint.max(axis=1, keepdims=True)
        probs = np.exp(log_joint)
        return _normalize_rows(probs)

    def to_state(self):
        return {"type": "gaussian_nb", "n_classes": self.n_classes,
                "var_smoothing": self.var_smoothing, "priors": self.priors_.tolist(),
                "means": self.means_.tolist(), "vars": self.vars_.tolist()}

    @classmethod
    def from_state(cls, state):
        obj = cls(state["n_classes"], state["var_smoothing"])
        obj.priors_ = np.array(state["priors"])
        obj.means_ = np.array(state["means"]).reshape(state["n_classes"], -1)
        obj.vars_ = np.array(state["vars"]).reshape(state["n_classes"], -1)
        return obj


# ---------------------------------------------------------------------------
# Registry

_BUILDERS = {}
_STATE_TYPES = {}


def register_builder(component_id, builder, state_cls=None, state_type=None):
    """Register a component builder: fn(params, n_classes, seed) -> component.
    Lets tests and users extend the catalog with their own components."""
    _BUILDERS[component_id] = builder
    if state_cls is not None:
        _STATE_TYPES[state_type or component_id] = state_cls


def build_component(component_id, params, n_classes, seed):
    builder = _BUILDERS.get(component_id)
    if builder is None:
        raise KeyError(f"no builder registered for component {component_id!r}")
    return builder(dict(params), n_classes, seed)


def component_from_state(state):
    cls = _STATE_TYPES.get(state.get("type"))
    if cls is None:
        raise KeyError(f"unknown component state type {state.get('type')!r}")
    return cls.from_state(state)


register_builder("standard_scaler", lambda p, nc, s: StandardScaler(),
                 StandardScaler)
register_builder("minmax_scaler", lambda p, nc, s: MinMaxScaler(), MinMaxScaler)
register_builder("variance_threshold",
                 lambda p, nc, s: VarianceThreshold(p.get("threshold", 0.0)),
                 VarianceThreshold)
register_builder("select_k_best", lambda p, nc, s: SelectKBest(p.get("k", 10)),
                 SelectKBest)
register_builder("knn",
                 lambda p, nc, s: KNearestNeighbors(nc, p.get("k", 5),
                                                    p.get("weights", "uniform")),
                 KNearestNeighbors)
register_builder("decision_tree",
                 lambda p, nc, s: DecisionTree(nc, p.get("max_depth", 10),
                                               p.get("min_samples_split", 2)),
                 DecisionTree)
register_builder("random_forest",
                 lambda p, nc, s: RandomForest(nc, p.get("n_estimators", 25),
                                               p.get("max_depth", 8), seed=s),
                 RandomForest)
register_builder("logistic_regression",
                 lambda p, nc, s: LogisticRegression(nc, p.get("l2", 1e-2)),
                 LogisticRegression)
register_builder("gaussian_nb",
                 lambda p, nc, s: GaussianNB(nc, p.get("var_smoothing", 1e-9)),
                 GaussianNB)


def default_space() -> SearchSpace:
    """The built-in search space over the catalog above."""
    return SearchSpace(
        components=[
            ComponentSpec("standard_scaler", "transformer", {}),
            ComponentSpec("minmax_scaler", "transformer", {}),
            ComponentSpec("variance_threshold", "transformer",
                          {"threshold": Domain.real(1e-5, 0.5, "log")}),
            ComponentSpec("select_k_best", "transformer",
                          {"k": Domain.integer(1, 20)}),
            ComponentSpec("knn", "estimator",
                          {"k": Domain.integer(1, 25),
                           "weights": Domain.categorical(["uniform", "distance"])}),
            ComponentSpec("decision_tree", "estimator",
                          {"max_depth": Domain.integer(1, 12),
                           "min_samples_split": Domain.integer(2, 20)}),
            ComponentSpec("random_forest", "estimator",
                          {"n_estimators": Domain.integer(5, 50),
                           "max_depth": Domain.integer(2, 12)}),
            ComponentSpec("logistic_regression", "estimator",
                          {"l2": Domain.real(1e-4, 10.0, "log")}),
            ComponentSpec("gaussian_nb", "estimator",
                          {"var_smoothing": Domain.real(1e-10, 1e-2, "log")}),
        ],
        max_pipeline_length=3,
    )
