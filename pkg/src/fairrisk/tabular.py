"""Tabular data model: records, datasets, CSV I/O, seeded splits and group filters.

Datasets are stored column-wise (a float covariate matrix plus integer label
vectors) and are never mutated after construction. Missing labels are encoded
as ``-1`` in the label vectors.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

MISSING = -1


class Group(enum.IntEnum):
    BASELINE = 0
    COMPARISON = 1


class DataError(ValueError):
    """Raised for malformed input data."""


@dataclass(frozen=True)
class Record:
    covariates: tuple[float, ...]
    group: Group
    outcome: int | None = None
    counterfactual_outcome: int | None = None


@dataclass(frozen=True)
class Schema:
    """Column bindings for CSV ingestion."""

    feature_names: tuple[str, ...]
    group_column: str = "group"
    outcome_column: str = "y"
    counterfactual_column: str = "y_star"
    baseline_label: str = "baseline"
    comparison_label: str = "comparison"

    def group_of(self, value: str) -> Group:
        if value == self.baseline_label:
            return Group.BASELINE
        if value == self.comparison_label:
            return Group.COMPARISON
        raise DataError(f"unknown group value {value!r}")

    def label_of(self, group: Group) -> str:
        return self.baseline_label if group == Group.BASELINE else self.comparison_label


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    group: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    seed: int = 0
    y_star: np.ndarray | None = None
    row_ids: np.ndarray | None = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, len(self.feature_names)) if self.feature_names else X.reshape(-1, 0)
        n, p = X.shape
        if p != len(self.feature_names):
            raise DataError(f"covariate width {p} does not match {len(self.feature_names)} feature names")
        group = np.asarray(self.group, dtype=np.int8).reshape(-1)
        y = np.asarray(self.y, dtype=np.int8).reshape(-1)
        if group.shape[0] != n or y.shape[0] != n:
            raise DataError("column lengths differ")
        if not np.isin(group, (0, 1)).all():
            raise DataError("group codes must be 0 (baseline) or 1 (comparison)")
        if not np.isin(y, (MISSING, 0, 1)).all():
            raise DataError("outcome must be 0, 1 or missing")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "group", _frozen(group))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.y_star is not None:
            ys = np.asarray(self.y_star, dtype=np.int8).reshape(-1)
            if ys.shape[0] != n or not np.isin(ys, (MISSING, 0, 1)).all():
                raise DataError("counterfactual outcome column is malformed")
            object.__setattr__(self, "y_star", _frozen(ys))
        ids = np.arange(n, dtype=np.int64) if self.row_ids is None else np.asarray(self.row_ids, dtype=np.int64)
        if ids.shape != (n,):
            raise DataError("row_ids length differs from dataset length")
        object.__setattr__(self, "row_ids", _frozen(ids))

    @classmethod
    def from_records(cls, records: Sequence[Record], feature_names: Sequence[str], seed: int = 0) -> "Dataset":
        p = len(feature_names)
        for k, r in enumerate(records):
            if len(r.covariates) != p:
                raise DataError(f"record {k} has {len(r.covariates)} covariates, expected {p}")
        X = np.array([r.covariates for r in records], dtype=np.float64).reshape(len(records), p)
        y = [MISSING if r.outcome is None else r.outcome for r in records]
        has_star = any(r.counterfactual_outcome is not None for r in records)
        y_star = [MISSING if r.counterfactual_outcome is None else r.counterfactual_outcome for r in records]
        return cls(X, [int(r.group) for r in records], y, tuple(feature_names), seed,
                   y_star if has_star else None)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def is_labeled(self) -> bool:
        return bool((self.y != MISSING).all())

    @property
    def has_counterfactual(self) -> bool:
        return self.y_star is not None and bool((self.y_star != MISSING).all())

    def record(self, k: int) -> Record:
        y = int(self.y[k])
        ys = None if self.y_star is None else int(self.y_star[k])
        return Record(
            tuple(float(v) for v in self.X[k]),
            Group(int(self.group[k])),
            None if y == MISSING else y,
            None if ys is None or ys == MISSING else ys,
        )

    @property
    def records(self) -> list[Record]:
        return [self.record(k) for k in range(len(self))]

    def __iter__(self) -> Iterator[Record]:
        return (self.record(k) for k in range(len(self)))

    def take(self, idx) -> "Dataset":
        """Subset by integer positions (order as given)."""
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            self.X[idx], self.group[idx], self.y[idx], self.feature_names, self.seed,
            None if self.y_star is None else self.y_star[idx], self.row_ids[idx],
        )

    def with_covariates(self, X: np.ndarray) -> "Dataset":
        return Dataset(X, self.group, self.y, self.feature_names, self.seed, self.y_star, self.row_ids)

    def with_seed(self, seed: int) -> "Dataset":
        return Dataset(self.X, self.group, self.y, self.feature_names, seed, self.y_star, self.row_ids)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.X[:, self.feature_names.index(name)]
        except ValueError:
            raise KeyError(f"unknown feature {name!r}") from None

    def require_labeled(self) -> None:
        if not self.is_labeled:
            k = int(np.flatnonzero(self.y == MISSING)[0])
            raise DataError(f"record {k} has no outcome label")

    def same_content(self, other: "Dataset") -> bool:
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.group, other.group)
            and np.array_equal(self.y, other.y)
            and (self.y_star is None) == (other.y_star is None)
            and (self.y_star is None or np.array_equal(self.y_star, other.y_star))
        )


def concat(parts: Sequence[Dataset]) -> Dataset:
    if not parts:
        raise DataError("nothing to concatenate")
    names = parts[0].feature_names
    if any(d.feature_names != names for d in parts):
        raise DataError("feature names differ between datasets")
    star = None
    if all(d.y_star is not None for d in parts):
        star = np.concatenate([d.y_star for d in parts])
    return Dataset(
        np.vstack([d.X for d in parts]),
        np.concatenate([d.group for d in parts]),
        np.concatenate([d.y for d in parts]),
        names,
        parts[0].seed,
        star,
        np.concatenate([d.row_ids for d in parts]),
    )


# --------------------------------------------------------------------------- CSV


def _parse_label(cell: str, column: str, row: int) -> int:
    cell = cell.strip()
    if cell == "":
        return MISSING
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"non-binary label {cell!r} in column '{column}' at row {row}") from None
    if value not in (0.0, 1.0):
        raise DataError(f"non-binary label {cell!r} in column '{column}' at row {row}")
    return int(value)


def load_csv(path: str | Path, schema: Schema, seed: int = 0, require_outcome: bool = True) -> Dataset:
    """Read a CSV file into a :class:`Dataset`.

    Row numbers in error messages count data rows from 1 (the header is row 0).
    An outcome column whose cells are empty yields unlabeled records; a missing
    outcome column is an error unless ``require_outcome`` is false.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        cols = {name: k for k, name in enumerate(header)}
        needed = list(schema.feature_names) + [schema.group_column]
        if require_outcome:
            needed.append(schema.outcome_column)
        for name in needed:
            if name not in cols:
                raise DataError(f"missing column '{name}'")
        f_idx = [cols[n] for n in schema.feature_names]
        g_idx = cols[schema.group_column]
        y_idx = cols.get(schema.outcome_column)
        s_idx = cols.get(schema.counterfactual_column)

        X, groups, ys, stars = [], [], [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(c.strip() == "" for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"malformed row {row_no}: expected {len(header)} fields, got {len(row)}")
            values = []
            for name, k in zip(schema.feature_names, f_idx):
                cell = row[k].strip()
                if cell == "":
                    raise DataError(f"missing covariate '{name}' at row {row_no}")
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"non-numeric covariate '{name}' at row {row_no}") from None
                if not math.isfinite(v):
                    raise DataError(f"non-finite covariate '{name}' at row {row_no}")
                values.append(v)
            X.append(values)
            groups.append(int(schema.group_of(row[g_idx].strip())))
            ys.append(MISSING if y_idx is None else _parse_label(row[y_idx], schema.outcome_column, row_no))
            if s_idx is not None:
                stars.append(_parse_label(row[s_idx], schema.counterfactual_column, row_no))

    p = len(schema.feature_names)
    return Dataset(
        np.array(X, dtype=np.float64).reshape(len(X), p),
        groups,
        ys,
        schema.feature_names,
        seed,
        stars if s_idx is not None else None,
    )


def save_csv(dataset: Dataset, path: str | Path, schema: Schema | None = None) -> None:
    """Write a dataset in the standard schema; floats use shortest round-trip repr."""
    schema = schema or Schema(dataset.feature_names)
    header = list(dataset.feature_names) + [schema.group_column, schema.outcome_column]
    if dataset.y_star is not None:
        header.append(schema.counterfactual_column)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(dataset)):
            row = [repr(float(v)) for v in dataset.X[k]]
            row.append(schema.label_of(Group(int(dataset.group[k]))))
            row.append("" if dataset.y[k] == MISSING else str(int(dataset.y[k])))
            if dataset.y_star is not None:
                row.append("" if dataset.y_star[k] == MISSING else str(int(dataset.y_star[k])))
            w.writerow(row)
    tmp.replace(path)


# ------------------------------------------------------------------------- splits


@dataclass(frozen=True)
class SplitSpec:
    fractions: Mapping[str, float]
    stratify_by_group: bool = False

    def __post_init__(self):
        fr = dict(self.fractions)
        if not fr:
            raise ValueError("split needs at least one part")
        if any(v < 0 for v in fr.values()):
            raise ValueError("split fractions must be nonnegative")
        if abs(math.fsum(fr.values()) - 1.0) > 1e-12:
            raise ValueError(f"split fractions sum to {math.fsum(fr.values())!r}, not 1")
        object.__setattr__(self, "fractions", fr)


def _allocate(n: int, fractions: Sequence[float]) -> list[int]:
    # largest-remainder apportionment; ties go to the earlier part
    raw = [f * n for f in fractions]
    sizes = [int(math.floor(r + 1e-9)) for r in raw]
    short = n - sum(sizes)
    order = sorted(range(len(raw)), key=lambda k: (-(raw[k] - sizes[k]), k))
    for k in order[:short]:
        sizes[k] += 1
    return sizes


def split(dataset: Dataset, spec: SplitSpec) -> dict[str, Dataset]:
    """Randomly partition ``dataset`` into named parts.

    The permutation comes from ``numpy.random.default_rng(dataset.seed)``. Each
    part keeps the original record order.
    """
    n = len(dataset)
    if n == 0:
        raise DataError("cannot split an empty dataset")
    names = list(spec.fractions)
    fractions = [spec.fractions[k] for k in names]
    rng = np.random.default_rng(dataset.seed)
    assigned: dict[str, list[np.ndarray]] = {k: [] for k in names}
    strata = [np.flatnonzero(dataset.group == g) for g in (0, 1)] if spec.stratify_by_group else [np.arange(n)]
    for members in strata:
        perm = members[rng.permutation(len(members))]
        start = 0
        for name, size in zip(names, _allocate(len(members), fractions)):
            assigned[name].append(perm[start:start + size])
            start += size
    return {k: dataset.take(np.sort(np.concatenate(v))) for k, v in assigned.items()}


def filter_group(dataset: Dataset, group: Group) -> Dataset:
    return dataset.take(np.flatnonzero(dataset.group == int(group)))
