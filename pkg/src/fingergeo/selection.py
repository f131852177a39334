"""Feature relevance, weights, and forward-backward greedy subset selection.

Two granularities are supported.  *Local* units are single columns; *global*
units are groups holding the same geometric attribute across the four fingers,
so a global selection always contains whole groups.  Candidates are visited in
relevance-rank order (R-FoBa) or in a seeded random order (FoBa).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AllZeroRelevance, BadLayout, ConfigError, DegenerateLabels, EmptyInput

# accuracies are ratios of small integers; compare them with a little slack
_TOL = 1e-12


# ---------------------------------------------------------------------------
# leave-one-out k-NN accuracy


def knn_vote(neighbor_labels):
    """Majority label of an ordered neighbor list; ties go to the nearest tied label."""
    values, counts = np.unique(neighbor_labels, return_counts=True)
    best = values[counts == counts.max()]
    for lab in neighbor_labels:
        if lab in best:
            return lab
    return neighbor_labels[0]


def loo_knn_accuracy(X, y, k=3):
    """Leave-one-sample-out accuracy of plain Euclidean k-NN.

    Neighbors are ordered by distance, then by row index (stable sort).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y)
    sq = (X * X).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * X @ X.T, 0.0)
    return _loo_from_distances(d2, y, k)


def _loo_from_distances(d2, y, k):
    n = len(y)
    if n < 2:
        return 0.0
    d2 = d2.copy()
    np.fill_diagonal(d2, np.inf)
    k = min(k, n - 1)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    nl = y[order]
    if k == 1:
        return float((nl[:, 0] == y).mean())
    correct = 0
    for i in range(n):
        correct += int(knn_vote(nl[i]) == y[i])
    return correct / n


class LooKnnEvaluator:
    """ψ(S): leave-one-out k-NN accuracy on the columns in S.

    Per-column squared differences are cached, so one evaluation costs a sum
    over |S| slices plus the neighbor search.  ψ(∅) = 0.
    """

    def __init__(self, X, y, k=3):
        X = np.asarray(X, dtype=float)
        self.y = np.asarray(y)
        self.k = k
        self._diff = (X[:, None, :] - X[None, :, :]) ** 2  # n x n x d
        self.calls = 0

    def __call__(self, columns):
        columns = list(columns)
        if not columns:
            return 0.0
        self.calls += 1
        d2 = self._diff[:, :, columns].sum(axis=2)
        return _loo_from_distances(d2, self.y, self.k)


def _check_labels(y):
    y = np.asarray(y)
    _, counts = np.unique(y, return_counts=True)
    if len(counts) < 2:
        raise DegenerateLabels("relevance needs at least 2 classes")
    if counts.min() < 2:
        raise DegenerateLabels("relevance needs at least 2 samples per class")
    return y


def per_feature_relevance(X, y, k=3):
    """Leave-one-out k-NN accuracy of each single column."""
    X = np.asarray(getattr(X, "values", X), dtype=float)
    y = _check_labels(y)
    psi = LooKnnEvaluator(X, y, k)
    return np.array([psi([j]) for j in range(X.shape[1])])


# ---------------------------------------------------------------------------
# ranking, weights and the threshold filter


def rank_features(accuracies):
    """Rank 1 = most accurate.  Equal accuracies rank the higher index first."""
    acc = np.asarray(accuracies, dtype=float)
    if acc.size == 0:
        raise EmptyInput("no accuracies to rank")
    order = sorted(range(acc.size), key=lambda i: (-acc[i], -i))
    ranks = np.empty(acc.size, dtype=int)
    ranks[order] = np.arange(1, acc.size + 1)
    return ranks


def compute_weights(accuracies):
    acc = np.asarray(accuracies, dtype=float)
    if acc.size == 0 or np.any(acc < 0):
        raise AllZeroRelevance("relevance scores must be nonnegative")
    total = acc.sum()
    if total <= 0:
        raise AllZeroRelevance("all relevance scores are zero")
    return acc / total


def threshold_filter(scores, th=None):
    """Indices whose score reaches ``th`` (default: the mean score)."""
    scores = np.asarray(scores, dtype=float)
    if th is None:
        th = scores.mean()
    slack = _TOL * max(1.0, abs(th))
    return np.nonzero(scores >= th - slack)[0]


def group_features(n, group_size=4, layout="finger-major"):
    """Partition ``n`` column indices into global groups.

    With the finger-major layout, group ``k`` holds columns
    ``k, k + n/g, k + 2n/g, ...``: the same attribute on every finger.  With a
    feature-major layout the groups are contiguous blocks.
    """
    if group_size < 1 or n % group_size:
        raise BadLayout(f"{n} columns cannot be split into groups of {group_size}")
    per = n // group_size
    if layout == "finger-major":
        return [[k + j * per for j in range(group_size)] for k in range(per)]
    if layout == "feature-major":
        return [list(range(k * group_size, (k + 1) * group_size)) for k in range(per)]
    raise BadLayout(f"unknown layout {layout!r}")


# ---------------------------------------------------------------------------
# forward / backward selection


@dataclass(frozen=True)
class SelectionConfig:
    delta: float = 0.003
    epsilon: float = 0.0
    granularity: str = "local"  # or "global"
    ordering: str = "rank"  # "rank" -> R-FoBa, "random" -> FoBa
    seed: int = 0
    k: int = 3
    group_size: int = 4
    layout: str = "finger-major"
    repeat_backward: bool = False
    evaluator: Optional[Callable] = field(default=None, compare=False, repr=False)

    def validate(self):
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"delta out of range (0, 1): {self.delta}")
        if not 0.0 <= self.epsilon < self.delta:
            raise ConfigError(f"epsilon out of range [0, delta): {self.epsilon}")
        if self.granularity not in ("local", "global"):
            raise ConfigError(f"unknown granularity {self.granularity!r}")
        if self.ordering not in ("rank", "random"):
            raise ConfigError(f"unknown ordering {self.ordering!r}")
        if self.k < 1:
            raise ConfigError("k must be positive")
        return self


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple  # column indices, acceptance order
    accuracy_trace: tuple
    phase_log: tuple
    config: SelectionConfig
    unit_accuracies: tuple = ()
    unit_ranks: tuple = ()
    weights: tuple = ()  # one per selected column, sums to 1
    column_names: tuple = ()

    @property
    def cardinality(self):
        return len(self.selected)

    @property
    def removals(self):
        return tuple(e for e in self.phase_log if e["phase"] == "backward")

    @property
    def final_accuracy(self):
        return self.accuracy_trace[-1] if self.accuracy_trace else 0.0

    def to_dict(self):
        cfg = self.config
        names = self.column_names or tuple(f"f{i + 1}" for i in range(max(self.selected, default=-1) + 1))
        return {
            "delta": cfg.delta,
            "epsilon": cfg.epsilon,
            "ordering": cfg.ordering,
            "seed": cfg.seed,
            "granularity": cfg.granularity,
            "k": cfg.k,
            "selected": [names[i] for i in self.selected],
            "selected_index": list(map(int, self.selected)),
            "ranks": list(map(int, self.unit_ranks)),
            "unit_accuracies": list(map(float, self.unit_accuracies)),
            "weights": list(map(float, self.weights)),
            "trace": list(map(float, self.accuracy_trace)),
            "removals": [dict(e) for e in self.removals],
            "log": [dict(e) for e in self.phase_log],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _units(n, config):
    if config.granularity == "global":
        return group_features(n, config.group_size, config.layout)
    return [[j] for j in range(n)]


def _duplicate_map(X):
    """Column -> lowest-index column with identical values."""
    first = {}
    out = {}
    for j in range(X.shape[1]):
        key = X[:, j].tobytes()
        out[j] = first.setdefault(key, j)
    return out


def _evaluator(X, y, config):
    if config.evaluator is None:
        return LooKnnEvaluator(X, y, config.k)
    return lambda cols: config.evaluator(X, y, list(cols)) if cols else 0.0


def _prepare(matrix, labels, config):
    X = np.asarray(getattr(matrix, "values", matrix), dtype=float)
    if X.ndim != 2 or X.shape[1] == 0 or X.shape[0] == 0:
        raise EmptyInput("selection needs a nonempty 2-D matrix")
    y = _check_labels(labels)
    if len(y) != X.shape[0]:
        raise DegenerateLabels("one label per row required")
    config.validate()
    return X, y


def _visit_order(unit_acc, first, config):
    rest = [u for u in range(len(unit_acc)) if u != first]
    if config.ordering == "rank":
        ranks = rank_features(unit_acc)
        return sorted(rest, key=lambda u: ranks[u])
    rng = np.random.default_rng(config.seed)
    return [rest[i] for i in rng.permutation(len(rest))]


def forward_select(matrix, labels, config=SelectionConfig(), *, _psi=None, _units_acc=None):
    """Greedy forward pass (S_Fo).

    The best single unit is taken first; every later unit is accepted iff it
    raises ψ by at least ``delta``.  A unit whose columns all duplicate already
    selected columns is treated as adding nothing.
    """
    X, y = _prepare(matrix, labels, config)
    psi = _psi or _evaluator(X, y, config)
    units = _units(X.shape[1], config)
    unit_acc = _units_acc if _units_acc is not None else np.array([psi(u) for u in units])
    dup = _duplicate_map(X)

    first = int(np.argmax(unit_acc))
    selected = list(units[first])
    current = float(unit_acc[first])
    trace = [current]
    log = [{"phase": "forward", "unit": first, "columns": list(units[first]),
            "gain": current, "accuracy": current}]
    for u in _visit_order(unit_acc, first, config):
        cols = units[u]
        held = {dup[c] for c in selected}
        if all(dup[c] in held for c in cols):
            continue
        score = psi(selected + cols)
        gain = score - current
        if gain >= config.delta - _TOL:
            selected += cols
            current = score
            trace.append(score)
            log.append({"phase": "forward", "unit": u, "columns": list(cols),
                        "gain": gain, "accuracy": score})
    return _result(selected, trace, log, config, unit_acc, X)


def backward_eliminate(forward, matrix, labels, config=None, *, _psi=None):
    """Single backward pass over S_Fo in acceptance order (S_FoBa).

    A unit is dropped when its removal raises ψ by at least ``delta`` or
    changes it by at most ``epsilon``.  The subset is never emptied.
    """
    config = config or forward.config
    X, y = _prepare(matrix, labels, config)
    psi = _psi or _evaluator(X, y, config)
    if not forward.selected:
        raise EmptyInput("backward elimination needs a nonempty subset")
    units = _accepted_units(forward)
    current = psi([c for u in units for c in u])
    trace = list(forward.accuracy_trace)
    log = list(forward.phase_log)
    while True:
        removed_any = False
        for unit in list(units):
            if len(units) == 1:
                break
            rest = [c for u in units if u is not unit for c in u]
            score = psi(rest)
            diff = score - current
            if diff >= config.delta - _TOL or abs(diff) <= config.epsilon + _TOL:
                units = [u for u in units if u is not unit]
                current = score
                trace.append(score)
                log.append({"phase": "backward", "columns": list(unit),
                            "change": diff, "accuracy": score})
                removed_any = True
        if not (config.repeat_backward and removed_any):
            break
    selected = [c for u in units for c in u]
    return _result(selected, trace, log, config, np.array(forward.unit_accuracies), X,
                   names=forward.column_names)


def _accepted_units(result):
    return [list(e["columns"]) for e in result.phase_log if e["phase"] == "forward"]


def _result(selected, trace, log, config, unit_acc, X, names=()):
    col_acc = _column_scores(unit_acc, X.shape[1], config)
    sel_acc = col_acc[selected]
    weights = compute_weights(sel_acc) if sel_acc.sum() > 0 else np.full(len(selected), 1 / len(selected))
    return SelectionResult(tuple(int(c) for c in selected), tuple(trace), tuple(log), config,
                           tuple(float(a) for a in unit_acc), tuple(rank_features(unit_acc)),
                           tuple(weights), tuple(names))


def _column_scores(unit_acc, n, config):
    """Spread unit accuracies onto columns (group members share the group's)."""
    scores = np.zeros(n)
    for acc, cols in zip(unit_acc, _units(n, config)):
        scores[cols] = acc
    return scores


def foba(matrix, labels, config=SelectionConfig()):
    """Forward selection followed by one backward pass.

    ``ordering="rank"`` gives R-FoBa, ``ordering="random"`` gives FoBa.
    """
    X, y = _prepare(matrix, labels, config)
    psi = _evaluator(X, y, config)
    fwd = forward_select(X, y, config, _psi=psi)
    names = tuple(getattr(matrix, "column_names", ()) or ())
    out = backward_eliminate(fwd, X, y, config, _psi=psi)
    if names:
        out = SelectionResult(out.selected, out.accuracy_trace, out.phase_log, out.config,
                              out.unit_accuracies, out.unit_ranks, out.weights, names)
    return out


def load_selection(path):
    """Selected column indices and weights from a selection JSON file."""
    with open(path) as fh:
        doc = json.load(fh)
    return list(doc["selected_index"]), np.array(doc["weights"], dtype=float), doc
