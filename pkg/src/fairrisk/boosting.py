"""Cost-weighted stochastic gradient boosting for a binary outcome.

Trees are fit by weighted least squares to the binomial-deviance residuals
``y - p`` and each terminal node takes one Newton step
``sum(w * (y - p)) / sum(w * p * (1 - p))`` (Friedman's TreeBoost). The
relative cost of false negatives is imposed only through case weights: rows
with outcome 1 weigh ``cost_ratio``, rows with outcome 0 weigh 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy.special import expit

from .tabular import Dataset, DataError

FORMAT_NAME = "fairrisk-gbt"
FORMAT_VERSION = 1

# relative slack when comparing split gains; keeps split choice stable under
# summation-order noise (e.g. weighted rows vs replicated rows)
_GAIN_RTOL = 1e-9


@dataclass(frozen=True)
class BoostConfig:
    n_trees: int = 500
    learning_rate: float = 0.1
    max_depth: int = 5
    subsample: float = 0.5
    cost_ratio: float = 8.0
    seed: int = 0
    min_leaf_weight: float = 10.0

    def __post_init__(self):
        if int(self.n_trees) != self.n_trees or self.n_trees < 1:
            raise ValueError("n_trees must be a positive integer")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if int(self.max_depth) != self.max_depth or self.max_depth < 1:
            raise ValueError("max_depth must be a positive integer")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must lie in (0, 1]")
        if not self.cost_ratio > 0:
            raise ValueError("cost_ratio must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.min_leaf_weight < 0:
            raise ValueError("min_leaf_weight must be nonnegative")


@dataclass(frozen=True, eq=False)
class Tree:
    """Array-encoded binary regression tree; leaves have ``feature == -1``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            r, nd = rows[inner], node[inner]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64),
        )


class _TreeBuilder:
    def __init__(self, X, resid, hess, w, max_depth, min_leaf_weight):
        self.X, self.wr, self.wh, self.w = X, w * resid, w * hess, w
        self.max_depth = max_depth
        self.min_leaf = min_leaf_weight
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def _new_node(self) -> int:
        for lst, v in ((self.feature, -1), (self.threshold, 0.0), (self.left, -1), (self.right, -1), (self.value, 0.0)):
            lst.append(v)
        return len(self.feature) - 1

    def _leaf_value(self, idx) -> float:
        num = math.fsum(self.wr[idx])
        den = math.fsum(self.wh[idx])
        return num / den if den > 1e-300 else 0.0

    def _best_split(self, idx):
        wr, w = self.wr[idx], self.w[idx]
        total_r, total_w = wr.sum(), w.sum()
        parent = total_r * total_r / total_w
        best = None
        candidates = []
        for f in range(self.X.shape[1]):
            xs = self.X[idx, f]
            order = np.argsort(xs, kind="stable")
            xs = xs[order]
            cr = np.cumsum(wr[order])[:-1]
            cw = np.cumsum(w[order])[:-1]
            rw = total_w - cw
            ok = (xs[1:] > xs[:-1]) & (cw >= self.min_leaf) & (rw >= self.min_leaf) & (cw > 0) & (rw > 0)
            if not ok.any():
                continue
            pos = np.flatnonzero(ok)
            gain = cr[pos] ** 2 / cw[pos] + (total_r - cr[pos]) ** 2 / rw[pos] - parent
            k = int(np.argmax(gain))
            candidates.append((f, pos, gain))
            if best is None or gain[k] > best:
                best = gain[k]
        if best is None or not best > 1e-12 * max(parent, 1e-300):
            return None
        floor = best - _GAIN_RTOL * abs(best)
        # first (feature, threshold) whose gain is within tolerance of the best
        for f, pos, gain in candidates:
            hit = np.flatnonzero(gain >= floor)
            if hit.size:
                k = pos[hit[0]]
                xs = np.sort(self.X[idx, f], kind="stable")
                return f, 0.5 * (xs[k] + xs[k + 1])
        return None

    def build(self, idx, depth=0) -> int:
        node = self._new_node()
        split = self._best_split(idx) if depth < self.max_depth else None
        if split is None:
            self.value[node] = self._leaf_value(idx)
            return node
        f, thr = split
        mask = self.X[idx, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self.build(idx[mask], depth + 1)
        self.right[node] = self.build(idx[~mask], depth + 1)
        return node

    def tree(self) -> Tree:
        return Tree(
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=np.float64),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=np.float64),
        )


@dataclass(frozen=True, eq=False)
class ProbModel:
    trees: tuple[Tree, ...]
    base_score: float
    config: BoostConfig
    n_features: int
    feature_names: tuple[str, ...] = field(default=())

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} covariates, got {X.shape[1]}")
        return X

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        margin = np.full(X.shape[0], self.base_score)
        lr = self.config.learning_rate
        for t in self.trees:
            margin += lr * t.predict(X)
        return margin

    def staged_decision_function(self, X) -> Iterator[np.ndarray]:
        X = self._check(X)
        margin = np.full(X.shape[0], self.base_score)
        lr = self.config.learning_rate
        for t in self.trees:
            margin = margin + lr * t.predict(X)
            yield margin

    def predict_proba_many(self, X) -> np.ndarray:
        """Return an ``(n, 2)`` array of ``(p(0|x), p(1|x))``."""
        p1 = expit(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def prob_one(self, X) -> np.ndarray:
        return expit(self.decision_function(X))

    def predict_label(self, X) -> np.ndarray:
        # exact ties go to label 0
        return (self.prob_one(X) > 0.5).astype(np.int8)

    def truncate(self, n_trees: int) -> "ProbModel":
        if not 1 <= n_trees <= len(self.trees):
            raise ValueError("n_trees out of range")
        return ProbModel(self.trees[:n_trees], self.base_score, self.config, self.n_features, self.feature_names)

    # ------------------------------------------------------------------ I/O

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "config": asdict(self.config),
            "n_features": self.n_features,
            "feature_names": list(self.feature_names),
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProbModel":
        if d.get("format") != FORMAT_NAME:
            raise ValueError("not a boosted-model file")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {d.get('version')}")
        return cls(
            tuple(Tree.from_dict(t) for t in d["trees"]),
            float(d["base_score"]),
            BoostConfig(**d["config"]),
            int(d["n_features"]),
            tuple(d.get("feature_names", ())),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(self.dumps(), encoding="utf-8")
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path) -> "ProbModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def derive_case_weights(dataset: Dataset, cost_ratio: float) -> np.ndarray:
    if not cost_ratio > 0:
        raise ValueError("cost_ratio must be positive")
    dataset.require_labeled()
    return np.where(dataset.y == 1, float(cost_ratio), 1.0)


def train_arrays(X: np.ndarray, y: np.ndarray, w: np.ndarray, config: BoostConfig,
                 feature_names: tuple[str, ...] = ()) -> ProbModel:
    """Boost on raw arrays with explicit case weights."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, p = X.shape
    if p == 0:
        raise DataError("no covariates to train on")
    if np.unique(y).size < 2:
        raise DataError("training data contain a single outcome class")
    if (w <= 0).any():
        raise ValueError("case weights must be positive")

    rate = math.fsum(w * y) / math.fsum(w)
    base = math.log(rate / (1.0 - rate))
    margin = np.full(n, base)
    rng = np.random.default_rng(config.seed)
    n_sub = max(1, int(round(config.subsample * n)))
    trees = []
    for _ in range(config.n_trees):
        if config.subsample < 1.0:
            idx = np.sort(rng.choice(n, size=n_sub, replace=False))
        else:
            idx = np.arange(n)
        prob = expit(margin)
        resid = y - prob
        hess = prob * (1.0 - prob)
        builder = _TreeBuilder(X, resid, hess, w, config.max_depth, config.min_leaf_weight)
        builder.build(idx)
        tree = builder.tree()
        trees.append(tree)
        margin = margin + config.learning_rate * tree.predict(X)
    return ProbModel(tuple(trees), base, config, p, tuple(feature_names))


def train(dataset: Dataset, config: BoostConfig) -> ProbModel:
    weights = derive_case_weights(dataset, config.cost_ratio)
    return train_arrays(dataset.X, dataset.y, weights, config, dataset.feature_names)


def predict_proba(model: ProbModel, x) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.n_features:
        raise ValueError(f"expected a vector of {model.n_features} covariates")
    p1 = float(model.prob_one(x)[0])
    return 1.0 - p1, p1


def weighted_deviance(y: np.ndarray, margin: np.ndarray, w: np.ndarray) -> float:
    """Weighted mean binomial deviance ``-2 * loglik / sum(w)`` from log-odds."""
    # log(1 + e^m) - y*m, computed stably
    ll = np.logaddexp(0.0, margin) - y * margin
    return 2.0 * float(np.sum(w * ll) / np.sum(w))


def plateau_iteration(trace, tol: float = 1e-4, patience: int = 25) -> int:
    """Smallest k (1-based) after which the next ``patience`` values improve on
    ``trace[k-1]`` by less than ``tol``; the full length when that never happens."""
    trace = np.asarray(trace, dtype=np.float64)
    n = trace.shape[0]
    for k in range(1, n + 1):
        window = trace[k:k + patience]
        if window.size == 0 or trace[k - 1] - window.min() < tol:
            return k
    return n


def deviance_trace(model: ProbModel, holdout: Dataset) -> np.ndarray:
    holdout.require_labeled()
    w = derive_case_weights(holdout, model.config.cost_ratio)
    y = holdout.y.astype(np.float64)
    return np.array([weighted_deviance(y, m, w) for m in model.staged_decision_function(holdout.X)])


def select_iterations(model: ProbModel, holdout: Dataset, tol: float = 1e-4, patience: int = 25) -> int:
    """Number of trees at which holdout deviance stops improving."""
    return min(plateau_iteration(deviance_trace(model, holdout), tol, patience), len(model.trees))
