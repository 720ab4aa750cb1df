"""Independent reference computations used as test oracles."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy import stats


def brute_force_assignment(X, Y) -> float:
    """Minimum over all permutation couplings of the mean squared distance."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n = X.shape[0]
    cost = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(-1)
    return min(sum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n))) / n


def sinkhorn_coupling(rng, m: int, n: int, iters: int = 5000) -> np.ndarray:
    """A random feasible coupling with uniform marginals, by alternating scaling."""
    K = rng.random((m, n)) + 1e-3
    r, c = np.full(m, 1.0 / m), np.full(n, 1.0 / n)
    for _ in range(iters):
        K *= (r / K.sum(1))[:, None]
        K *= (c / K.sum(0))[None, :]
        if abs(K.sum(1) - r).max() < 1e-14:
            break
    return K


def conformal_threshold(scores, alpha: str) -> float:
    """Order statistic ceil((n+1)(1-alpha)) in exact rational arithmetic, clamped."""
    s = sorted(scores)
    n = len(s)
    k = math.ceil((n + 1) * (1 - Fraction(alpha)))
    return s[min(max(k, 1), n) - 1]


def normal_overlap(delta: float) -> float:
    """Overlap (min-density integral) of N(0,1) and N(delta,1)."""
    return 2.0 * stats.norm.cdf(-abs(delta) / 2.0)
