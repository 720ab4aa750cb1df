"""Exact discrete optimal transport between two uniform empirical measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._simplex import transport_simplex

DEFAULT_MEMORY_BUDGET = 25_000_000


class BudgetExceeded(MemoryError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteCoupling:
    """Optimal coupling ``gamma`` (m x n) between source and destination points.

    Rows sum to ``1/m`` and columns to ``1/n``. ``objective`` is the squared
    2-Wasserstein distance between the two empirical measures (in the units of
    the cost actually used, see ``standardized``).
    """

    gamma: np.ndarray
    source_points: np.ndarray
    dest_points: np.ndarray
    objective: float
    support: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
    n_pivots: int = 0
    standardized: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.gamma.shape


def _as_points(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ValueError("points must be a 1-D or 2-D array")
    return a


def squared_distances(source: np.ndarray, dest: np.ndarray) -> np.ndarray:
    # direct differences; the expanded |x|^2 + |y|^2 - 2xy form loses exactness
    out = np.zeros((source.shape[0], dest.shape[0]))
    for k in range(source.shape[1]):
        diff = source[:, k, None] - dest[None, :, k]
        out += diff * diff
    return out


def solve_coupling(source, dest, memory_budget: int = DEFAULT_MEMORY_BUDGET,
                   standardize: bool = False) -> DiscreteCoupling:
    """Solve the Kantorovich linear program exactly.

    Parameters
    ----------
    source : array-like (m, d)
        Points of the measure being transported.
    dest : array-like (n, d)
        Points of the target measure.
    memory_budget : int
        Largest admissible ``m * n``; bigger problems should go through
        :func:`batched_fit_map`.
    standardize : bool
        Scale every coordinate by the pooled standard deviation before
        computing costs. Off by default.
    """
    X = _as_points(source)
    Y = _as_points(dest)
    m, n = X.shape[0], Y.shape[0]
    if m < 1 or n < 1:
        raise ValueError("both point sets must be nonempty")
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: source has d={X.shape[1]}, dest has d={Y.shape[1]}")
    if m * n > memory_budget:
        raise BudgetExceeded(
            f"coupling of size {m}x{n} exceeds the memory budget of {memory_budget} entries; "
            "use batched_fit_map with smaller batches"
        )
    Xc, Yc = X, Y
    if standardize:
        scale = np.vstack([X, Y]).std(axis=0)
        scale[scale == 0] = 1.0
        Xc, Yc = X / scale, Y / scale
    cost = squared_distances(Xc, Yc)
    bi, bj, flow, pivots = transport_simplex(cost, 50 * (m + n) * (m + n) + 10_000)
    if pivots < 0:
        raise RuntimeError("transport simplex hit its iteration limit")
    keep = flow > 0
    bi, bj, flow = bi[keep], bj[keep], flow[keep]
    scale_mn = float(m * n)
    gamma = np.zeros((m, n))
    gamma[bi, bj] = flow / scale_mn
    objective = float(np.sum(cost[bi, bj] * flow) / scale_mn)
    # support keeps integer flows (units of 1/(m n)) so projections stay exact
    return DiscreteCoupling(gamma, X, Y, objective, (bi, bj, flow), int(pivots), standardize)


def barycentric_project(coupling: DiscreteCoupling) -> np.ndarray:
    """Map each source point to ``m * sum_j gamma_ij * Y_j``.

    Returns the ``(m, d)`` array of transported points; row ``i`` pairs with
    ``coupling.source_points[i]``.
    """
    m, n = coupling.gamma.shape
    if coupling.support is not None:
        bi, bj, flow = coupling.support
        weight = flow / float(n)
    else:
        bi, bj = np.nonzero(coupling.gamma)
        weight = m * coupling.gamma[bi, bj]
    out = np.zeros((m, coupling.dest_points.shape[1]))
    np.add.at(out, bi, weight[:, None] * coupling.dest_points[bj])
    return out
