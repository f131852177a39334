"""Weighted k-NN, a bagged CART forest with out-of-bag bookkeeping, and k-fold CV."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DegenerateLabels, LengthMismatch, TooFewRows
from .selection import knn_vote

FOREST_FORMAT = "fingergeo-forest"
FOREST_VERSION = 1


# ---------------------------------------------------------------------------
# weighted k-NN


def wknn_distance(tr_row, ts_row, weights):
    """sqrt(Σ w_i (tr_i - ts_i)^2)."""
    a = np.asarray(tr_row, dtype=float)
    b = np.asarray(ts_row, dtype=float)
    w = np.asarray(weights, dtype=float)
    if not (a.shape == b.shape == w.shape):
        raise LengthMismatch(f"lengths differ: {a.shape}, {b.shape}, {w.shape}")
    return float(np.sqrt(np.sum(w * (a - b) ** 2)))


def correlation_distance(A, B):
    """1 - Pearson correlation between every row of A and every row of B.

    A row with zero variance has undefined correlation; its distance is 1.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    A = A - A.mean(axis=1, keepdims=True)
    B = B - B.mean(axis=1, keepdims=True)
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    denom = np.outer(na, nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 0, (A @ B.T) / np.where(denom > 0, denom, 1.0), 0.0)
    return 1.0 - r


@dataclass(frozen=True)
class KnnModel:
    reference: np.ndarray
    labels: np.ndarray
    weights: Optional[np.ndarray] = None
    k: int = 3
    metric: str = "euclidean"  # or "correlation"

    def __post_init__(self):
        ref = np.atleast_2d(np.asarray(self.reference, dtype=float))
        object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "labels", np.asarray(self.labels))
        w = np.full(ref.shape[1], 1.0 / ref.shape[1]) if self.weights is None else np.asarray(self.weights, float)
        object.__setattr__(self, "weights", w)
        if len(self.labels) != ref.shape[0]:
            raise LengthMismatch("one label per reference row required")
        if w.shape != (ref.shape[1],):
            raise LengthMismatch(f"{len(w)} weights for {ref.shape[1]} columns")
        if not 1 <= self.k <= ref.shape[0]:
            raise ConfigError(f"k={self.k} outside 1..{ref.shape[0]}")
        if self.metric not in ("euclidean", "correlation"):
            raise ConfigError(f"unknown metric {self.metric!r}")

    def distances(self, probes):
        P = np.atleast_2d(np.asarray(probes, dtype=float))
        if P.shape[1] != self.reference.shape[1]:
            raise LengthMismatch(f"probe has {P.shape[1]} columns, model {self.reference.shape[1]}")
        if self.metric == "correlation":
            return correlation_distance(P, self.reference)
        diff = P[:, None, :] - self.reference[None, :, :]
        return np.sqrt(np.einsum("pnd,d->pn", diff * diff, self.weights))

    def neighbors(self, probes):
        """Indices of the k nearest reference rows per probe (distance, then row order)."""
        return np.argsort(self.distances(probes), axis=1, kind="stable")[:, : self.k]

    def predict(self, probes):
        nn = self.neighbors(probes)
        return np.array([knn_vote(self.labels[row]) for row in nn])


def wknn_classify(model, probe):
    return model.predict(np.atleast_2d(probe))[0]


# ---------------------------------------------------------------------------
# CART trees and the bagged forest


@dataclass
class Tree:
    """Flat binary tree.  Internal node: ``x[feature] <= threshold`` goes left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # nodes x classes, leaf class distributions

    def apply(self, X):
        X = np.atleast_2d(X)
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            f = self.feature[node[idx]]
            go_left = X[idx, f] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
            active = self.feature[node] >= 0
        return node

    def predict_proba(self, X):
        return self.value[self.apply(X)]

    def to_dict(self):
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["feature"], dtype=int), np.array(d["threshold"], dtype=float),
                   np.array(d["left"], dtype=int), np.array(d["right"], dtype=int),
                   np.array(d["value"], dtype=float).reshape(len(d["feature"]), -1))


def _best_split(X, y_onehot, idx, features):
    """Lowest weighted Gini over the candidate features, or None."""
    best = None
    n = len(idx)
    for f in features:
        x = X[idx, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        valid = np.nonzero(xs[:-1] < xs[1:])[0]
        if valid.size == 0:
            continue
        cum = np.cumsum(y_onehot[idx[order]], axis=0)
        left = cum[valid]
        right = cum[-1] - left
        nl = (valid + 1).astype(float)
        nr = n - nl
        gini_l = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
        gini_r = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
        impurity = (nl * gini_l + nr * gini_r) / n
        j = int(np.argmin(impurity))
        if best is None or impurity[j] < best[0] - 1e-15:
            pos = valid[j]
            best = (impurity[j], f, 0.5 * (xs[pos] + xs[pos + 1]))
    return best


def grow_tree(X, y, n_classes, rng, max_features=None, min_leaf=1):
    """CART on class ids ``y`` with Gini splits over random candidate columns.

    Nodes are split until pure.  When none of the sampled columns can split a
    node, the remaining columns are tried in random order before giving up.
    """
    n, d = X.shape
    m = max_features or max(1, int(math.sqrt(d)))
    onehot = np.eye(n_classes)[y]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(onehot[idx].mean(axis=0))
        return len(feature) - 1

    stack = [(new_node(np.arange(n)), np.arange(n))]
    while stack:
        node, idx = stack.pop()
        if len(idx) < 2 * min_leaf or value[node].max() == 1.0:
            continue
        perm = rng.permutation(d)
        split = _best_split(X, onehot, idx, perm[:m])
        if split is None and m < d:
            split = _best_split(X, onehot, idx, perm[m:])
        if split is None:
            continue
        _, f, t = split
        go_left = X[idx, f] <= t
        li, ri = idx[go_left], idx[~go_left]
        if len(li) < min_leaf or len(ri) < min_leaf:
            continue
        feature[node], threshold[node] = int(f), float(t)
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri))
        stack.append((left[node], li))
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                np.array(value).reshape(len(feature), n_classes))


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 150
    seed: int = 0
    max_features: Optional[int] = None  # default sqrt(n_features)
    min_leaf: int = 1


@dataclass
class ForestModel:
    trees: list
    bootstraps: list  # row indices drawn for each tree
    classes: np.ndarray
    n_rows: int
    n_features: int
    config: ForestConfig = field(default_factory=ForestConfig)

    def oob_rows(self, t):
        inbag = np.zeros(self.n_rows, dtype=bool)
        inbag[self.bootstraps[t]] = True
        return np.nonzero(~inbag)[0]

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)

    def predict(self, X):
        return self.classes[np.argmax(self.predict_proba(X), axis=1)]

    def to_json(self):
        doc = {
            "format": FOREST_FORMAT,
            "version": FOREST_VERSION,
            "classes": self.classes.tolist(),
            "n_rows": self.n_rows,
            "n_features": self.n_features,
            "config": {"n_trees": self.config.n_trees, "seed": self.config.seed,
                       "max_features": self.config.max_features, "min_leaf": self.config.min_leaf},
            "trees": [dict(t.to_dict(), bootstrap=b.tolist()) for t, b in zip(self.trees, self.bootstraps)],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("format") != FOREST_FORMAT or doc.get("version") != FOREST_VERSION:
            raise ValueError("not a forest dump this version can read")
        trees = [Tree.from_dict(t) for t in doc["trees"]]
        boots = [np.array(t["bootstrap"], dtype=int) for t in doc["trees"]]
        return cls(trees, boots, np.array(doc["classes"]), doc["n_rows"], doc["n_features"],
                   ForestConfig(**doc["config"]))


def forest_train(X, y, config=ForestConfig()):
    """Bagged CART forest.  Each tree sees a bootstrap resample of the rows."""
    X = np.asarray(getattr(X, "values", X), dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) == 0:
        raise DegenerateLabels("forest training needs at least one labelled row")
    if len(y) != len(X):
        raise LengthMismatch("one label per row required")
    if config.n_trees < 1:
        raise ConfigError("n_trees must be at least 1")
    classes, yid = np.unique(y, return_inverse=True)
    rng = np.random.default_rng(config.seed)
    trees, boots = [], []
    n = len(X)
    for _ in range(config.n_trees):
        rows = rng.integers(0, n, n)
        trees.append(grow_tree(X[rows], yid[rows], len(classes), rng,
                               config.max_features, config.min_leaf))
        boots.append(rows)
    return ForestModel(trees, boots, classes, n, X.shape[1], config)


def forest_predict(model, probe):
    """``(label, class scores)``; scores are the mean leaf distribution over trees."""
    scores = model.predict_proba(np.atleast_2d(probe))[0]
    return model.classes[int(np.argmax(scores))], scores


@dataclass(frozen=True)
class OobReport:
    curve: np.ndarray  # error after t trees, t = 1..n_trees (nan if no row is oob yet)
    evaluated: np.ndarray  # rows contributing at each t
    never_oob: int  # rows that every bootstrap drew

    @property
    def final(self):
        return float(self.curve[-1])

    @property
    def mean(self):
        return float(np.nanmean(self.curve))

    @property
    def min(self):
        return float(np.nanmin(self.curve))


def oob_error(model, X, y):
    """Out-of-bag error as a function of the number of trees."""
    X = np.asarray(getattr(X, "values", X), dtype=float)
    y = np.asarray(y)
    lookup = {c: i for i, c in enumerate(model.classes.tolist())}
    yid = np.array([lookup[v] for v in y.tolist()])
    sums = np.zeros((len(X), len(model.classes)))
    seen = np.zeros(len(X), dtype=bool)
    curve, evaluated = [], []
    for t, tree in enumerate(model.trees):
        rows = model.oob_rows(t)
        if rows.size:
            sums[rows] += tree.predict_proba(X[rows])
            seen[rows] = True
        if seen.any():
            pred = np.argmax(sums[seen], axis=1)
            curve.append(float(np.mean(pred != yid[seen])))
        else:
            curve.append(float("nan"))
        evaluated.append(int(seen.sum()))
    return OobReport(np.array(curve), np.array(evaluated), int((~seen).sum()))


# ---------------------------------------------------------------------------
# cross-validation


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "wknn"  # or "forest"
    k: int = 3
    metric: str = "euclidean"
    weights: Optional[tuple] = None
    forest: ForestConfig = ForestConfig()

    def validate(self):
        if self.kind not in ("wknn", "forest"):
            raise ConfigError(f"unknown classifier {self.kind!r}")
        if self.metric not in ("euclidean", "correlation"):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.k < 1:
            raise ConfigError("k must be positive")
        return self


def fit_predict(config, X_train, y_train, X_test):
    config.validate()
    if config.kind == "forest":
        return forest_train(X_train, y_train, config.forest).predict(X_test)
    w = None if config.weights is None else np.asarray(config.weights, dtype=float)
    k = min(config.k, len(X_train))
    return KnnModel(X_train, y_train, w, k, config.metric).predict(X_test)


@dataclass(frozen=True)
class CvReport:
    fold_errors: tuple
    folds: np.ndarray  # fold id per row

    @property
    def mean_error(self):
        return float(np.mean(self.fold_errors))


def fold_assignment(y, folds=10, seed=0):
    """Stratified-as-possible fold ids.

    Rows of each class (classes in sorted order) are shuffled and dealt to
    folds round-robin, the dealer position carrying over between classes.
    """
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    out = np.empty(len(y), dtype=int)
    pos = 0
    for c in np.unique(y):
        rows = np.nonzero(y == c)[0]
        rows = rows[rng.permutation(len(rows))]
        out[rows] = (pos + np.arange(len(rows))) % folds
        pos = (pos + len(rows)) % folds
    return out


def kfold_cv(X, y, folds=10, config=ClassifierConfig(), seed=0):
    X = np.asarray(getattr(X, "values", X), dtype=float)
    y = np.asarray(y)
    if len(X) < folds or folds < 2:
        raise TooFewRows(f"{len(X)} rows cannot fill {folds} folds")
    assign = fold_assignment(y, folds, seed)
    errors = []
    for f in range(folds):
        test = assign == f
        pred = fit_predict(config, X[~test], y[~test], X[test])
        errors.append(float(np.mean(pred != y[test])))
    return CvReport(tuple(errors), assign)
