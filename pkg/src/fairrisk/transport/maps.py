"""Smoothed transport maps fitted to barycentric pairs, plus batched estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.ensemble import RandomForestRegressor

from .coupling import DEFAULT_MEMORY_BUDGET, BudgetExceeded, barycentric_project, solve_coupling

MIN_PAIRS = 20


@dataclass(frozen=True)
class ForestSettings:
    n_trees: int = 200
    min_leaf: int = 5
    n_jobs: int | None = None

    def max_features(self, d: int) -> int:
        return max(1, math.ceil(d / 3))


@dataclass(eq=False)
class TransportMap:
    """Per-coordinate regression forests ``x -> T_k(x)``."""

    regressors: list
    source: np.ndarray
    target: np.ndarray
    seed: int = 0

    @property
    def dim(self) -> int:
        return self.source.shape[1]

    def apply_many(self, X) -> np.ndarray:
        X = _check_dim(X, self.dim)
        return np.column_stack([r.predict(X) for r in self.regressors])

    def __call__(self, X) -> np.ndarray:
        return self.apply_many(X)


@dataclass(eq=False)
class AveragedTransportMap:
    """Arithmetic mean of several per-batch maps."""

    maps: list[TransportMap]
    batches: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.maps[0].dim

    def apply_many(self, X) -> np.ndarray:
        X = _check_dim(X, self.dim)
        out = np.zeros((X.shape[0], self.dim))
        for mp in self.maps:
            out += mp.apply_many(X)
        return out / len(self.maps)

    def __call__(self, X) -> np.ndarray:
        return self.apply_many(X)


def _check_dim(X, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != d:
        raise ValueError(f"dimension mismatch: map expects d={d}, got {X.shape[1]}")
    return X


def _coordinate_seeds(seed: int, d: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(s) for s in ss.generate_state(d, dtype=np.uint32)]


def fit_smoothed_map(source, target, seed: int = 0, forest: ForestSettings | None = None) -> TransportMap:
    """Regress each coordinate of the transported points on the source points.

    ``source[i]`` and ``target[i]`` form the i-th (X_i, Y_hat_i) pair.
    """
    forest = forest or ForestSettings()
    X = np.asarray(source, dtype=np.float64)
    Y = np.asarray(target, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    if X.shape[0] != Y.shape[0]:
        raise ValueError("source and target pair counts differ")
    if X.shape[0] < MIN_PAIRS:
        raise ValueError(f"need at least {MIN_PAIRS} pairs to smooth a map, got {X.shape[0]}")
    d_in = X.shape[1]
    regs = []
    for k, s in enumerate(_coordinate_seeds(seed, Y.shape[1])):
        rf = RandomForestRegressor(
            n_estimators=forest.n_trees,
            min_samples_leaf=forest.min_leaf,
            max_features=forest.max_features(d_in),
            random_state=s,
            n_jobs=forest.n_jobs,
        )
        rf.fit(X, Y[:, k])
        regs.append(rf)
    return TransportMap(regs, X, Y, seed)


def apply_map(transport_map, x) -> np.ndarray:
    """Transport a single covariate vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("apply_map takes one covariate vector")
    return transport_map.apply_many(x.reshape(1, -1))[0]


def _batch_indices(rng: np.random.Generator, size: int, n_batches: int, batch_size: int) -> list[np.ndarray]:
    perm = rng.permutation(size)
    return [np.sort(perm[k * batch_size:(k + 1) * batch_size]) for k in range(n_batches)]


def batched_fit_map(source_data, dest_data, n_batches: int, batch_size: int, seed: int = 0,
                    averaging: str = "mean", forest: ForestSettings | None = None,
                    memory_budget: int = DEFAULT_MEMORY_BUDGET, standardize: bool = False):
    """Estimate a transport map from disjoint random batches.

    Each batch pairs ``batch_size`` random source rows with ``batch_size``
    random destination rows and solves its own coupling. With
    ``averaging="mean"`` every batch gets its own smoothed map and the result
    averages their outputs; ``averaging="pool"`` fits one map on all pairs.
    """
    X = np.asarray(source_data, dtype=np.float64)
    Y = np.asarray(dest_data, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    if n_batches < 1 or batch_size < 1:
        raise ValueError("n_batches and batch_size must be positive")
    need = n_batches * batch_size
    if X.shape[0] < need or Y.shape[0] < need:
        raise ValueError(
            f"{n_batches} batches of {batch_size} need {need} records per side; "
            f"got {X.shape[0]} source and {Y.shape[0]} destination"
        )
    if batch_size * batch_size > memory_budget:
        raise BudgetExceeded(f"batch_size {batch_size} squared exceeds the memory budget of {memory_budget} entries")
    if averaging not in ("mean", "pool"):
        raise ValueError("averaging must be 'mean' or 'pool'")
    rng = np.random.default_rng(seed)
    src_batches = _batch_indices(rng, X.shape[0], n_batches, batch_size)
    dst_batches = _batch_indices(rng, Y.shape[0], n_batches, batch_size)

    pairs = []
    for si, di in zip(src_batches, dst_batches):
        coupling = solve_coupling(X[si], Y[di], memory_budget, standardize)
        pairs.append((X[si], barycentric_project(coupling)))

    if averaging == "pool":
        mp = fit_smoothed_map(np.vstack([p[0] for p in pairs]), np.vstack([p[1] for p in pairs]), seed, forest)
        return AveragedTransportMap([mp], list(zip(src_batches, dst_batches)))
    maps = [fit_smoothed_map(xs, ys, seed + k, forest) for k, (xs, ys) in enumerate(pairs)]
    return AveragedTransportMap(maps, list(zip(src_batches, dst_batches)))


def transport_points(source_data, dest_data, n_batches: int = 1, seed: int = 0,
                     memory_budget: int = DEFAULT_MEMORY_BUDGET, standardize: bool = False) -> np.ndarray:
    """Barycentric transport of every source row, without smoothing.

    Both sides are shuffled and cut into ``n_batches`` near-equal batches; the
    k-th source batch is coupled with the k-th destination batch. Row ``i`` of
    the result is the transport of ``source_data[i]``.
    """
    X = np.asarray(source_data, dtype=np.float64)
    Y = np.asarray(dest_data, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    if n_batches < 1 or n_batches > min(X.shape[0], Y.shape[0]):
        raise ValueError("n_batches must lie between 1 and the smaller sample size")
    rng = np.random.default_rng(seed)
    src = np.array_split(rng.permutation(X.shape[0]), n_batches)
    dst = np.array_split(rng.permutation(Y.shape[0]), n_batches)
    out = np.empty((X.shape[0], Y.shape[1]))
    for si, di in zip(src, dst):
        out[si] = barycentric_project(solve_coupling(X[si], Y[di], memory_budget, standardize))
    return out
