"""Shared-bin histograms and overlap coefficients for marginal comparisons."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class HistogramTable:
    edges: np.ndarray
    counts_a: np.ndarray
    counts_b: np.ndarray
    overlap: float
    feature: str = ""

    def rows(self):
        for k in range(self.counts_a.shape[0]):
            yield float(self.edges[k]), float(self.edges[k + 1]), int(self.counts_a[k]), int(self.counts_b[k])

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_left", "bin_right", "count_a", "count_b"])
            for left, right, ca, cb in self.rows():
                w.writerow([repr(left), repr(right), ca, cb])
            w.writerow(["overlap", "", repr(self.overlap), ""])
        tmp.replace(path)


def shared_histogram(a, b, n_bins: int = 30, feature: str = "") -> HistogramTable:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    if n_bins < 1:
        raise ValueError("n_bins must be positive")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, n_bins + 1)
    ca, _ = np.histogram(a, edges)
    cb, _ = np.histogram(b, edges)
    # integer cross-multiplication keeps identical samples at exactly 1
    na, nb = a.size, b.size
    shared = int(np.minimum(ca.astype(np.int64) * nb, cb.astype(np.int64) * na).sum())
    return HistogramTable(edges, ca, cb, shared / (na * nb), feature)


def overlap_coefficient(a, b, n_bins: int = 30) -> float:
    """Sum over shared bins of the smaller bin proportion; 1 means identical."""
    return shared_histogram(a, b, n_bins).overlap


def diagnose_marginals(a, b, feature: str, n_bins: int = 30) -> HistogramTable:
    """Compare one feature's marginal between two datasets."""
    return shared_histogram(a.column(feature), b.column(feature), n_bins, feature)
