"""Split conformal prediction sets for a binary outcome.

The nonconformity score of label ``y`` at ``x`` is ``1 - p(y|x)``, i.e.
``|y - p(1|x)|``. A label enters the prediction set when its score does not
exceed the calibration threshold.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .tabular import Dataset

SET_LABELS = ("{}", "{0}", "{1}", "{0,1}")

# guards ceil() against representation error in (n + 1) * (1 - alpha)
_INDEX_SLACK = 1e-9


def score_from_p1(p1, y):
    """Nonconformity of label ``y`` given ``p(1|x)``; vectorized."""
    y = np.asarray(y)
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    p1 = np.asarray(p1, dtype=np.float64)
    return np.where(y == 1, 1.0 - p1, p1)


def score(model, x, y: int) -> float:
    if y not in (0, 1):
        raise ValueError(f"invalid label {y!r}; expected 0 or 1")
    p1 = float(model.prob_one(np.asarray(x, dtype=np.float64))[0])
    return float(score_from_p1(p1, y))


@dataclass(frozen=True, eq=False)
class ConformalCalibration:
    scores: np.ndarray
    alpha: float
    gamma_hat: float

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "gamma_hat": self.gamma_hat, "n_calibration": self.n,
                "scores": self.scores.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ConformalCalibration":
        return cls(np.asarray(d["scores"], dtype=np.float64), float(d["alpha"]), float(d["gamma_hat"]))

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        payload = self.to_dict()
        if extra:
            payload.update(extra)
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(payload, indent=1), encoding="utf-8")
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path) -> "ConformalCalibration":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def quantile_index(n: int, alpha: float) -> int:
    """1-based order statistic ``ceil((n + 1)(1 - alpha))`` clamped to ``[1, n]``."""
    k = math.ceil((n + 1) * (1.0 - alpha) - _INDEX_SLACK)
    return min(max(k, 1), n)


def calibrate_scores(scores, alpha: float) -> ConformalCalibration:
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    s = np.sort(np.asarray(scores, dtype=np.float64))
    if s.size == 0:
        raise ValueError("calibration set is empty")
    return ConformalCalibration(s, float(alpha), float(s[quantile_index(s.size, alpha) - 1]))


def calibrate(model, calibration: Dataset, alpha: float) -> ConformalCalibration:
    if len(calibration) == 0:
        raise ValueError("calibration set is empty")
    calibration.require_labeled()
    p1 = model.prob_one(calibration.X)
    return calibrate_scores(score_from_p1(p1, calibration.y), alpha)


@dataclass(frozen=True)
class PredictionSet:
    members: frozenset
    threshold_used: float

    @property
    def label(self) -> str:
        return SET_LABELS[int(set_code(0 in self.members, 1 in self.members))]


def set_code(has0, has1):
    """0 = empty, 1 = {0}, 2 = {1}, 3 = {0,1}; works on arrays."""
    return np.asarray(has0, dtype=np.int64) + 2 * np.asarray(has1, dtype=np.int64)


def set_membership(gamma_hat: float, p1) -> tuple[np.ndarray, np.ndarray]:
    """Boolean arrays: does each set contain 0, and 1?"""
    p1 = np.asarray(p1, dtype=np.float64)
    return score_from_p1(p1, 0) <= gamma_hat, score_from_p1(p1, 1) <= gamma_hat


def predict_set(calibration: ConformalCalibration, model, x) -> PredictionSet:
    p1 = model.prob_one(np.asarray(x, dtype=np.float64))[0]
    has0, has1 = set_membership(calibration.gamma_hat, p1)
    members = frozenset(y for y, ok in ((0, bool(has0)), (1, bool(has1))) if ok)
    return PredictionSet(members, calibration.gamma_hat)


class SetProportions(NamedTuple):
    empty: float
    only_0: float
    only_1: float
    both: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["prediction_set", "proportion"])
            for label, v in zip(SET_LABELS, self):
                w.writerow([label, repr(float(v))])


def proportions_from_codes(codes) -> SetProportions:
    codes = np.asarray(codes, dtype=np.int64)
    if codes.size == 0:
        raise ValueError("no prediction sets to summarize")
    counts = np.bincount(codes, minlength=4)
    return SetProportions(*(counts / codes.size).tolist())


def proportions_from_p1(gamma_hat: float, p1) -> SetProportions:
    has0, has1 = set_membership(gamma_hat, p1)
    return proportions_from_codes(set_code(has0, has1))


def set_proportions(calibration: ConformalCalibration, model, unlabeled) -> SetProportions:
    """Share of each prediction set, in the order {}, {0}, {1}, {0,1}.

    ``unlabeled`` is a :class:`Dataset` or a covariate matrix.
    """
    X = unlabeled.X if isinstance(unlabeled, Dataset) else np.asarray(unlabeled, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("no rows to predict")
    return proportions_from_p1(calibration.gamma_hat, model.prob_one(X))
