"""Confusion tables and group parity measures.

Tables are indexed ``counts[actual, predicted]``. Classification error
conditions on the actual class (a row), forecasting error on the predicted
class (a column). Empty rows or columns raise :class:`UndefinedRate` instead of
returning 0 or NaN.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .conformal import SET_LABELS, SetProportions
from .transport import DEFAULT_MEMORY_BUDGET, transport_points

INTERNAL_FAIRNESS_NOTE = (
    "Internal fairness only: error rates below are computed against observed test labels, "
    "which carry the status quo that produced them. External fairness (parity with respect to "
    "counterfactual outcomes) cannot be evaluated from test data without untestable causal assumptions. "
    "Prediction parity needs no labels and is the one measure that is fully assessable here."
)

OBSERVABILITY_NOTE = (
    "No counterfactual outcome column: counterfactual error rates are computable only when "
    "the counterfactual outcome is known, i.e. for simulated data."
)


class UndefinedRate(ValueError):
    """A rate whose conditioning row or column is empty."""


@dataclass(frozen=True, eq=False)
class ConfusionTable:
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (2, 2) or (c < 0).any():
            raise ValueError("a confusion table is a 2x2 array of nonnegative counts")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def false_positives(self) -> int:
        return int(self.counts[0, 1])

    @property
    def false_negatives(self) -> int:
        return int(self.counts[1, 0])

    @property
    def cost_ratio(self) -> float:
        """Empirical false positive count over false negative count."""
        if self.false_negatives == 0:
            raise UndefinedRate("no false negatives; cost ratio undefined")
        return self.false_positives / self.false_negatives

    @property
    def base_rate(self) -> float:
        return int(self.counts[1].sum()) / self.n

    @property
    def predicted_positive_rate(self) -> float:
        return int(self.counts[:, 1].sum()) / self.n

    def classification_error(self, for_class: int) -> float:
        return classification_error(self, for_class)

    def forecasting_error(self, for_prediction: int) -> float:
        return forecasting_error(self, for_prediction)

    def text(self, title: str = "") -> str:
        """Render in the layout rows = actual, columns = predicted, errors on the margins."""
        def fmt(fn, k):
            try:
                return f"{fn(self, k):.3f}"
            except UndefinedRate:
                return "undef"

        c = self.counts
        lines = []
        if title:
            lines.append(title)
        lines.append(f"{'Actual outcome':<18}{'Predicted 0':>14}{'Predicted 1':>14}{'Class. error':>15}")
        lines.append(f"{'0':<18}{c[0, 0]:>14d}{c[0, 1]:>14d}{fmt(classification_error, 0):>15}")
        lines.append(f"{'1':<18}{c[1, 0]:>14d}{c[1, 1]:>14d}{fmt(classification_error, 1):>15}")
        lines.append(f"{'Forecast error':<18}{fmt(forecasting_error, 0):>14}{fmt(forecasting_error, 1):>14}")
        ratio = f"{self.cost_ratio:.2f}" if self.false_negatives else "undef"
        lines.append(f"base rate {self.base_rate:.3f}; predicted positive {self.predicted_positive_rate:.3f}; "
                     f"FP/FN {ratio}")
        return "\n".join(lines)


def _labels(a, name: str) -> np.ndarray:
    a = np.asarray(a).reshape(-1)
    if not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return a.astype(np.int64)


def confusion_table(actuals: Sequence[int], predictions: Sequence[int]) -> ConfusionTable:
    y = _labels(actuals, "actuals")
    yhat = _labels(predictions, "predictions")
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.size} actuals vs {yhat.size} predictions")
    if y.size == 0:
        raise ValueError("no observations")
    return ConfusionTable(np.bincount(2 * y + yhat, minlength=4).reshape(2, 2))


def classification_error(table: ConfusionTable, for_class: int) -> float:
    """Share misclassified among rows whose actual outcome is ``for_class``."""
    if for_class not in (0, 1):
        raise ValueError("for_class must be 0 or 1")
    row = table.counts[for_class]
    total = int(row.sum())
    if total == 0:
        raise UndefinedRate(f"no observations with actual outcome {for_class}")
    return int(row[1 - for_class]) / total


def forecasting_error(table: ConfusionTable, for_prediction: int) -> float:
    """Share wrong among rows predicted as ``for_prediction``."""
    if for_prediction not in (0, 1):
        raise ValueError("for_prediction must be 0 or 1")
    col = table.counts[:, for_prediction]
    total = int(col.sum())
    if total == 0:
        raise UndefinedRate(f"no observations predicted as {for_prediction}")
    return int(col[1 - for_prediction]) / total


def prediction_parity_gap(props_a, props_b) -> float:
    """Total-variation distance between two set-proportion vectors."""
    a = np.asarray(props_a, dtype=np.float64).reshape(-1)
    b = np.asarray(props_b, dtype=np.float64).reshape(-1)
    for v in (a, b):
        if v.shape != (4,) or (v < -1e-12).any() or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError("set proportions must be four nonnegative values summing to 1")
    return float(0.5 * np.abs(a - b).sum())


def counterfactual_classification_error(predictions, counterfactual_outcomes, for_class: int) -> float:
    """Classification error measured against counterfactual outcomes.

    Only simulated data carry counterfactual outcomes; real test data never do.
    """
    if counterfactual_outcomes is None:
        raise ValueError(
            "counterfactual outcomes are absent; they cannot be observed in real data, "
            "so this rate is computable only for simulated data"
        )
    ys = np.asarray(counterfactual_outcomes).reshape(-1)
    if (ys < 0).any():
        raise ValueError("counterfactual outcomes are missing for some rows; they cannot be observed in real data")
    return classification_error(confusion_table(ys, predictions), for_class)


def joint_transport_confusion(baseline_test, comparison_test, model, n_batches: int = 1, seed: int = 0,
                              memory_budget: int = DEFAULT_MEMORY_BUDGET, standardize: bool = False,
                              ) -> tuple[ConfusionTable, ConfusionTable]:
    """Transport the comparison group's (covariates, outcome) onto the baseline's.

    The outcome rides along as an extra coordinate. Its transported value is a
    weighted average of baseline outcomes and is rounded to 1 when above 0.5.
    Returns the baseline table and the transported comparison table, both
    scored by ``model``.
    """
    baseline_test.require_labeled()
    comparison_test.require_labeled()
    src = np.column_stack([comparison_test.X, comparison_test.y.astype(np.float64)])
    dst = np.column_stack([baseline_test.X, baseline_test.y.astype(np.float64)])
    moved = transport_points(src, dst, n_batches=n_batches, seed=seed,
                             memory_budget=memory_budget, standardize=standardize)
    x_moved = moved[:, :-1]
    y_moved = (moved[:, -1] > 0.5).astype(np.int64)
    base = confusion_table(baseline_test.y, model.predict_label(baseline_test.X))
    moved_table = confusion_table(y_moved, model.predict_label(x_moved))
    return base, moved_table


# ------------------------------------------------------------------ reports


def _safe(fn, *args):
    try:
        return fn(*args)
    except UndefinedRate:
        return None


def _gap(a, b):
    return None if a is None or b is None else abs(a - b)


@dataclass(eq=False)
class ParityReport:
    tables: dict[str, ConfusionTable]
    proportions: dict[str, SetProportions]
    counterfactual_tables: dict[str, ConfusionTable] | None = None
    notes: list[str] = field(default_factory=list)

    def _pair(self):
        a, b = list(self.tables)[:2]
        return a, b

    @property
    def prediction_parity_gap(self) -> float:
        a, b = list(self.proportions)[:2]
        return prediction_parity_gap(self.proportions[a], self.proportions[b])

    def gaps(self) -> dict[str, float | None]:
        a, b = self._pair()
        ta, tb = self.tables[a], self.tables[b]
        out: dict[str, float | None] = {"prediction_parity_tv": self.prediction_parity_gap}
        for k in (0, 1):
            out[f"classification_error_{k}"] = _gap(_safe(classification_error, ta, k), _safe(classification_error, tb, k))
        for k in (0, 1):
            out[f"forecasting_error_{k}"] = _gap(_safe(forecasting_error, ta, k), _safe(forecasting_error, tb, k))
        out["cost_ratio"] = _gap(_safe(lambda t: t.cost_ratio, ta), _safe(lambda t: t.cost_ratio, tb))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["block", "group", "key", "value"])
        for g, t in self.tables.items():
            for i in (0, 1):
                for j in (0, 1):
                    w.writerow(["confusion", g, f"actual{i}_pred{j}", int(t.counts[i, j])])
            for k in (0, 1):
                w.writerow(["classification_error", g, k, _fmt(_safe(classification_error, t, k))])
                w.writerow(["forecasting_error", g, k, _fmt(_safe(forecasting_error, t, k))])
            w.writerow(["cost_ratio", g, "fp_over_fn", _fmt(_safe(lambda t: t.cost_ratio, t))])
            w.writerow(["base_rate", g, "", _fmt(t.base_rate)])
        for g, p in self.proportions.items():
            for label, v in zip(SET_LABELS, p):
                w.writerow(["set_proportion", g, label, _fmt(v)])
        for key, v in self.gaps().items():
            w.writerow(["gap", "", key, _fmt(v)])
        if self.counterfactual_tables:
            for g, t in self.counterfactual_tables.items():
                for k in (0, 1):
                    w.writerow(["counterfactual_classification_error", g, k, _fmt(_safe(classification_error, t, k))])
        return buf.getvalue()

    def text(self) -> str:
        parts = [INTERNAL_FAIRNESS_NOTE, ""]
        for g, t in self.tables.items():
            parts.append(t.text(f"Test data confusion table: {g}"))
            parts.append("")
        parts.append(f"{'Prediction set':<16}" + "".join(f"{g:>14}" for g in self.proportions))
        for k, label in enumerate(SET_LABELS):
            parts.append(f"{label:<16}" + "".join(f"{p[k]:>14.3f}" for p in self.proportions.values()))
        parts.append("")
        parts.append("Pairwise gaps (reported separately, never combined):")
        for key, v in self.gaps().items():
            parts.append(f"  {key:<26}{_fmt(v)}")
        parts.append("")
        if self.counterfactual_tables:
            parts.append("Counterfactual classification error (simulation only):")
            for g, t in self.counterfactual_tables.items():
                vals = ", ".join(f"class {k}: {_fmt(_safe(classification_error, t, k))}" for k in (0, 1))
                parts.append(f"  {g}: {vals}")
        else:
            parts.append(OBSERVABILITY_NOTE)
        parts.extend(self.notes)
        return "\n".join(parts) + "\n"

    def to_dict(self) -> dict:
        return {
            "tables": {g: t.counts.tolist() for g, t in self.tables.items()},
            "proportions": {g: list(p) for g, p in self.proportions.items()},
            "counterfactual_tables": None if not self.counterfactual_tables
            else {g: t.counts.tolist() for g, t in self.counterfactual_tables.items()},
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParityReport":
        cf = d.get("counterfactual_tables")
        return cls(
            {g: ConfusionTable(np.asarray(c)) for g, c in d["tables"].items()},
            {g: SetProportions(*p) for g, p in d["proportions"].items()},
            None if not cf else {g: ConfusionTable(np.asarray(c)) for g, c in cf.items()},
            list(d.get("notes", [])),
        )


def _fmt(v) -> str:
    return "undef" if v is None else f"{v:.6f}"
