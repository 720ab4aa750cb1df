"""Pipeline configuration read from a ``key = value`` text file.

Blank lines and lines starting with ``#`` are ignored. Every key below may
also be given on the command line as ``--key value`` (underscores or dashes),
which overrides the file. Unknown keys are an error.

    input              labeled training CSV (both groups)
    out_dir            artifact directory
    features           comma-separated covariate columns; empty = every column
                       other than the group, outcome, counterfactual and row_id
    group_column, outcome_column, counterfactual_column
    baseline_label, comparison_label
    split_seed         seed of the baseline training/calibration split
    train_fraction     share of baseline rows used for training; the rest calibrates
    holdout_fraction   share of the training split held out to choose the
                       number of trees; 0 keeps all n_trees
    n_trees, learning_rate, max_depth, subsample, cost_ratio,
    min_leaf_weight, boost_seed
    alpha              miscoverage level of the prediction sets
    transport_batches, transport_batch_size (0 = as large as the data allow)
    transport_averaging  mean | pool
    transport_input    optional CSV whose covariates the map is fitted on
                       (comparison rows to baseline rows) instead of the
                       comparison rows of ``input`` and the baseline training split
    memory_budget      largest coupling matrix, in entries
    standardize        scale covariates before computing distances
    map_seed           seed for batching and the map forests
    forest_trees, forest_min_leaf
    n_bins             histogram bins in the marginal diagnostics
    use_transport      false scores comparison rows without the map
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from .boosting import BoostConfig
from .tabular import Schema
from .transport import DEFAULT_MEMORY_BUDGET, ForestSettings


class ConfigError(ValueError):
    """Invalid or unreadable pipeline configuration."""


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class PipelineConfig:
    input: str = ""
    out_dir: str = "artifacts"
    features: str = ""
    group_column: str = "group"
    outcome_column: str = "y"
    counterfactual_column: str = "y_star"
    baseline_label: str = "baseline"
    comparison_label: str = "comparison"
    split_seed: int = 0
    train_fraction: float = 0.75
    holdout_fraction: float = 0.0
    n_trees: int = 150
    learning_rate: float = 0.1
    max_depth: int = 1
    subsample: float = 0.5
    cost_ratio: float = 8.0
    min_leaf_weight: float = 10.0
    boost_seed: int = 0
    alpha: float = 0.05
    transport_batches: int = 2
    transport_batch_size: int = 0
    transport_averaging: str = "mean"
    transport_input: str = ""
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    standardize: bool = False
    map_seed: int = 0
    forest_trees: int = 200
    forest_min_leaf: int = 5
    n_bins: int = 30
    use_transport: bool = True

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if not 0 <= self.holdout_fraction < 1:
            raise ConfigError("holdout_fraction must lie in [0, 1)")
        if self.transport_averaging not in ("mean", "pool"):
            raise ConfigError("transport_averaging must be 'mean' or 'pool'")
        if self.transport_batches < 1 or self.transport_batch_size < 0:
            raise ConfigError("transport batching must be positive")
        if self.n_bins < 1:
            raise ConfigError("n_bins must be positive")
        try:
            self.boost_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # -------------------------------------------------------------- views

    @property
    def feature_list(self) -> tuple[str, ...]:
        return tuple(f.strip() for f in self.features.split(",") if f.strip())

    def schema(self, feature_names) -> Schema:
        return Schema(tuple(feature_names), self.group_column, self.outcome_column,
                      self.counterfactual_column, self.baseline_label, self.comparison_label)

    def boost_config(self) -> BoostConfig:
        return BoostConfig(n_trees=self.n_trees, learning_rate=self.learning_rate, max_depth=self.max_depth,
                           subsample=self.subsample, cost_ratio=self.cost_ratio, seed=self.boost_seed,
                           min_leaf_weight=self.min_leaf_weight)

    def forest(self) -> ForestSettings:
        return ForestSettings(n_trees=self.forest_trees, min_leaf=self.forest_min_leaf)

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    # ------------------------------------------------------------ parsing

    def with_overrides(self, overrides: Mapping[str, Any]) -> "PipelineConfig":
        """Apply overrides; string values are coerced to the field type."""
        changes = {}
        types = _field_types()
        for key, value in overrides.items():
            if value is None:
                continue
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown config key '{key}'")
            changes[key] = _coerce(key, value, types[key])
        return dataclasses.replace(self, **changes)


def _field_types() -> dict[str, type]:
    kinds = {"int": int, "float": float, "bool": bool, "str": str}
    return {f.name: kinds[f.type] if isinstance(f.type, str) else f.type for f in fields(PipelineConfig)}


def _coerce(key: str, value: Any, kind: type) -> Any:
    if not isinstance(value, str):
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        if isinstance(value, kind):
            return value
        raise ConfigError(f"config key '{key}' expects {kind.__name__}")
    text = value.strip()
    if kind is bool:
        if text.lower() in _TRUE:
            return True
        if text.lower() in _FALSE:
            return False
        raise ConfigError(f"config key '{key}' expects true or false, got {text!r}")
    if kind is str:
        return text
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"config key '{key}' expects {kind.__name__}, got {text!r}") from None


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key in out:
            raise ConfigError(f"config line {lineno}: duplicate key '{key}'")
        out[key] = value.strip()
    return out


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    """Read ``path`` (if given) and apply ``overrides`` on top."""
    cfg = PipelineConfig()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        cfg = cfg.with_overrides(parse_config_text(text))
    if overrides:
        cfg = cfg.with_overrides(overrides)
    return cfg


def dump_config(cfg: PipelineConfig) -> str:
    lines = []
    for f in fields(PipelineConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(lines) + "\n"
