"""Train-on-baseline, transport, calibrate, forecast and evaluate, with artifacts on disk.

Artifacts live in ``out_dir`` and form a hash chain so that stale or mixed
files are refused:

    manifest.json     input hash, feature list, baseline train/calibration rows
    model.json        boosted model; records the manifest hash
    map.joblib        fitted transport map
    map.json          map file hash and the manifest hash it was built from
    calibration.json  scores and threshold; records the model hash

Every file is written to a temporary name and renamed into place.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import joblib
import numpy as np

from .boosting import ProbModel, select_iterations, train
from .conformal import SET_LABELS, ConformalCalibration, calibrate, proportions_from_codes, set_code, set_membership
from .config import PipelineConfig
from .metrics import ConfusionTable, ParityReport, confusion_table
from .synth import SynthConfig, generate
from .tabular import DataError, Dataset, Group, SplitSpec, filter_group, load_csv, save_csv, split
from .transport import AveragedTransportMap, HistogramTable, batched_fit_map, shared_histogram

MANIFEST = "manifest.json"
MODEL = "model.json"
MAP = "map.joblib"
MAP_MANIFEST = "map.json"
CALIBRATION = "calibration.json"
TRANSPORTED = "transported.csv"
OVERLAP_SUMMARY = "transport_overlap.csv"

_RESERVED = ("row_id",)


class PipelineError(Exception):
    """A pipeline step cannot run; ``code`` is a short machine-readable tag."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- file helpers


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)


def _read_json(path: Path, missing_hint: str) -> dict:
    if not path.exists():
        raise PipelineError("missing_artifact", f"{path.name} not found in {path.parent}; {missing_hint}")
    return json.loads(path.read_text(encoding="utf-8"))


def _require_file(path: str, what: str) -> Path:
    if not path:
        raise PipelineError("missing_input", f"no {what} given")
    p = Path(path)
    if not p.is_file():
        raise PipelineError("missing_input", f"{what} {path} not found")
    return p


def _header(path: Path) -> list[str]:
    with path.open(newline="", encoding="utf-8") as fh:
        try:
            return [h.strip() for h in next(csv.reader(fh))]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None


def resolve_features(cfg: PipelineConfig, path: Path) -> tuple[str, ...]:
    """Configured features, or every non-reserved column of the CSV header."""
    if cfg.feature_list:
        return cfg.feature_list
    skip = {cfg.group_column, cfg.outcome_column, cfg.counterfactual_column, *_RESERVED}
    names = tuple(h for h in _header(path) if h not in skip)
    if not names:
        raise DataError(f"{path}: no covariate columns")
    return names


# ----------------------------------------------------------------------- synth


def cmd_synth(path: str | Path, config: SynthConfig | None = None) -> Dataset:
    data = generate(config or SynthConfig())
    save_csv(data, path)
    return data


# ------------------------------------------------------------------------- fit


@dataclass
class FitResult:
    model: ProbModel
    manifest: dict
    train: Dataset
    calibration: Dataset


def _load_input(cfg: PipelineConfig, features=None) -> tuple[Dataset, Path]:
    path = _require_file(cfg.input, "input CSV")
    features = features or resolve_features(cfg, path)
    return load_csv(path, cfg.schema(features), seed=cfg.split_seed), path


def cmd_fit(cfg: PipelineConfig) -> FitResult:
    """Split the baseline rows into training and calibration parts and train on the first."""
    data, path = _load_input(cfg)
    data.require_labeled()
    baseline = filter_group(data, Group.BASELINE)
    if len(baseline) == 0:
        raise PipelineError("empty_group", "baseline group empty")
    parts = split(baseline, SplitSpec({"train": cfg.train_fraction, "calibration": 1.0 - cfg.train_fraction}))
    train_part = parts["train"]
    holdout_rows: list[int] = []
    fit_part = train_part
    if cfg.holdout_fraction > 0:
        inner = split(train_part.with_seed(cfg.split_seed + 1),
                      SplitSpec({"fit": 1.0 - cfg.holdout_fraction, "holdout": cfg.holdout_fraction}))
        fit_part = inner["fit"]
        holdout_rows = inner["holdout"].row_ids.tolist()
    model = train(fit_part, cfg.boost_config())
    if holdout_rows:
        model = model.truncate(select_iterations(model, inner["holdout"]))

    out = cfg.out_path
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "kind": "split-manifest",
        "input_sha256": file_sha256(path),
        "features": list(data.feature_names),
        "schema": {k: getattr(cfg, k) for k in ("group_column", "outcome_column", "counterfactual_column",
                                                 "baseline_label", "comparison_label")},
        "split_seed": cfg.split_seed,
        "train_fraction": cfg.train_fraction,
        "holdout_fraction": cfg.holdout_fraction,
        "train_rows": train_part.row_ids.tolist(),
        "holdout_rows": holdout_rows,
        "calibration_rows": parts["calibration"].row_ids.tolist(),
        "n_trees_used": len(model.trees),
    }
    _write_json(out / MANIFEST, manifest)
    payload = model.to_dict()
    payload["parent_sha256"] = file_sha256(out / MANIFEST)
    _write_json(out / MODEL, payload)
    return FitResult(model, manifest, train_part, parts["calibration"])


# ------------------------------------------------------------ artifact loading


def _manifest(cfg: PipelineConfig) -> dict:
    return _read_json(cfg.out_path / MANIFEST, "run fit first")


def _check_input(cfg: PipelineConfig, manifest: dict) -> tuple[Dataset, Path]:
    data, path = _load_input(cfg, tuple(manifest["features"]))
    if file_sha256(path) != manifest["input_sha256"]:
        raise PipelineError("chain_mismatch", "input CSV differs from the one recorded at fit time; rerun fit")
    return data, path


def _load_model(cfg: PipelineConfig) -> ProbModel:
    out = cfg.out_path
    payload = _read_json(out / MODEL, "run fit first")
    if payload.get("parent_sha256") != file_sha256(out / MANIFEST):
        raise PipelineError("chain_mismatch", "model.json was not built from the current manifest; rerun fit")
    return ProbModel.from_dict(payload)


def _load_calibration(cfg: PipelineConfig) -> ConformalCalibration:
    out = cfg.out_path
    payload = _read_json(out / CALIBRATION, "run calibrate first")
    if payload.get("parent_sha256") != file_sha256(out / MODEL):
        raise PipelineError("chain_mismatch", "calibration.json was not built from the current model; rerun calibrate")
    return ConformalCalibration.from_dict(payload)


def load_map(cfg: PipelineConfig) -> AveragedTransportMap:
    out = cfg.out_path
    if not (out / MAP).exists() or not (out / MAP_MANIFEST).exists():
        raise PipelineError("missing_artifact", "transport map not found; run transport first")
    meta = json.loads((out / MAP_MANIFEST).read_text(encoding="utf-8"))
    if meta.get("map_sha256") != file_sha256(out / MAP):
        raise PipelineError("chain_mismatch", "map.joblib does not match map.json; rerun transport")
    if meta.get("parent_sha256") != file_sha256(out / MANIFEST):
        raise PipelineError("chain_mismatch", "transport map was not built from the current manifest; rerun transport")
    return joblib.load(out / MAP)


# ------------------------------------------------------------------- transport


@dataclass
class TransportResult:
    transport_map: AveragedTransportMap
    transported: Dataset
    before: dict[str, HistogramTable]
    raw: dict[str, HistogramTable]
    smoothed: dict[str, HistogramTable]


def cmd_transport(cfg: PipelineConfig) -> TransportResult:
    """Fit the comparison-to-baseline map and write diagnostics.

    By default the map goes from the comparison rows of the input to the
    baseline training split; ``transport_input`` substitutes another file whose
    comparison and baseline rows play those roles.
    """
    manifest = _manifest(cfg)
    features = tuple(manifest["features"])
    data, _ = _check_input(cfg, manifest)
    if cfg.transport_input:
        other = load_csv(_require_file(cfg.transport_input, "transport input"), cfg.schema(features),
                         require_outcome=False)
        source = filter_group(other, Group.COMPARISON)
        dest = filter_group(other, Group.BASELINE)
        source_desc = {"source": "transport_input", "transport_input_sha256": file_sha256(cfg.transport_input)}
    else:
        source = filter_group(data, Group.COMPARISON)
        dest = data.take(manifest["train_rows"])
        source_desc = {"source": "input"}
    if len(source) == 0:
        raise PipelineError("empty_group", "comparison group empty")
    if len(dest) == 0:
        raise PipelineError("empty_group", "baseline group empty")

    batch_size = cfg.transport_batch_size or min(len(source), len(dest)) // cfg.transport_batches
    mp = batched_fit_map(source.X, dest.X, cfg.transport_batches, batch_size, seed=cfg.map_seed,
                         averaging=cfg.transport_averaging, forest=cfg.forest(),
                         memory_budget=cfg.memory_budget, standardize=cfg.standardize)
    raw = np.vstack([m.target for m in mp.maps])
    smoothed = mp(source.X)
    transported = source.with_covariates(smoothed)

    out = cfg.out_path
    tmp = out / (MAP + ".tmp")
    joblib.dump(mp, tmp)
    tmp.replace(out / MAP)
    _write_json(out / MAP_MANIFEST, {
        "kind": "transport-map",
        "map_sha256": file_sha256(out / MAP),
        "parent_sha256": file_sha256(out / MANIFEST),
        "n_batches": cfg.transport_batches,
        "batch_size": batch_size,
        "averaging": cfg.transport_averaging,
        "standardize": cfg.standardize,
        "map_seed": cfg.map_seed,
        **source_desc,
    })
    save_csv(transported, out / TRANSPORTED, cfg.schema(features))

    before, raw_h, smooth_h = {}, {}, {}
    for k, name in enumerate(features):
        before[name] = shared_histogram(source.X[:, k], dest.X[:, k], cfg.n_bins, name)
        raw_h[name] = shared_histogram(raw[:, k], dest.X[:, k], cfg.n_bins, name)
        smooth_h[name] = shared_histogram(smoothed[:, k], dest.X[:, k], cfg.n_bins, name)
        before[name].to_csv(out / f"hist_{name}_before.csv")
        raw_h[name].to_csv(out / f"hist_{name}.csv")
        smooth_h[name].to_csv(out / f"hist_{name}_smoothed.csv")
    tmp = out / (OVERLAP_SUMMARY + ".tmp")
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "overlap_before", "overlap_transported", "overlap_smoothed"])
        for name in features:
            w.writerow([name, repr(before[name].overlap), repr(raw_h[name].overlap), repr(smooth_h[name].overlap)])
    tmp.replace(out / OVERLAP_SUMMARY)
    return TransportResult(mp, transported, before, raw_h, smooth_h)


# ------------------------------------------------------------------- calibrate


def cmd_calibrate(cfg: PipelineConfig) -> ConformalCalibration:
    """Conformal calibration on the baseline calibration split only."""
    manifest = _manifest(cfg)
    model = _load_model(cfg)
    data, _ = _check_input(cfg, manifest)
    rows = manifest["calibration_rows"]
    if not rows:
        raise PipelineError("empty_split", "calibration split is empty")
    cal = calibrate(model, data.take(rows), cfg.alpha)
    cal.save(cfg.out_path / CALIBRATION, {"kind": "calibration", "parent_sha256": file_sha256(cfg.out_path / MODEL)})
    return cal


# -------------------------------------------------------------------- forecast


@dataclass
class Forecast:
    row_ids: np.ndarray
    group: np.ndarray
    point: np.ndarray
    set_codes: np.ndarray
    p1: np.ndarray
    transported: bool

    def to_csv(self, path: str | Path, cfg: PipelineConfig) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row_id", "group", "point_prediction", "set_members", "p1"])
            for k in range(self.row_ids.shape[0]):
                label = cfg.baseline_label if self.group[k] == Group.BASELINE else cfg.comparison_label
                w.writerow([int(self.row_ids[k]), label, int(self.point[k]),
                            SET_LABELS[int(self.set_codes[k])], repr(float(self.p1[k]))])
        tmp.replace(path)


def forecast_dataset(data: Dataset, model: ProbModel, calibration: ConformalCalibration,
                     transport_map=None) -> Forecast:
    """Score each row; comparison rows go through ``transport_map`` when one is given.

    Baseline rows are scored on their own covariates only, so their output does
    not depend on which other rows are present.
    """
    if data.p != model.n_features:
        raise PipelineError("dimension_mismatch", f"data have {data.p} covariates, model expects {model.n_features}")
    p1 = np.empty(len(data))
    base = np.flatnonzero(data.group == Group.BASELINE)
    comp = np.flatnonzero(data.group == Group.COMPARISON)
    if base.size:
        p1[base] = model.prob_one(data.X[base])
    if comp.size:
        Xc = data.X[comp] if transport_map is None else transport_map(data.X[comp])
        p1[comp] = model.prob_one(Xc)
    point = (p1 > 0.5).astype(np.int8)
    has0, has1 = set_membership(calibration.gamma_hat, p1)
    return Forecast(data.row_ids.copy(), data.group.copy(), point, set_code(has0, has1), p1,
                    transport_map is not None)


def _scoring_artifacts(cfg: PipelineConfig):
    _manifest(cfg)
    model = _load_model(cfg)
    cal = _load_calibration(cfg)
    mp = load_map(cfg) if cfg.use_transport else None
    return model, cal, mp


def _load_scoring_data(cfg: PipelineConfig, path: str | Path, labeled: bool) -> Dataset:
    features = tuple(_manifest(cfg)["features"])
    p = _require_file(str(path), "data CSV")
    return load_csv(p, cfg.schema(features), require_outcome=labeled)


def cmd_forecast(cfg: PipelineConfig, data_path: str | Path, output: str | Path | None = None) -> Forecast:
    model, cal, mp = _scoring_artifacts(cfg)
    data = _load_scoring_data(cfg, data_path, labeled=False)
    fc = forecast_dataset(data, model, cal, mp)
    fc.to_csv(output or cfg.out_path / "forecast.csv", cfg)
    return fc


# -------------------------------------------------------------------- evaluate


def report_prefix(cfg: PipelineConfig) -> str:
    return "report" if cfg.use_transport else "report_no_transport"


def evaluate_forecast(data: Dataset, fc: Forecast, cfg: PipelineConfig) -> ParityReport:
    data.require_labeled()
    tables: dict[str, ConfusionTable] = {}
    props = {}
    cf: dict[str, ConfusionTable] = {}
    for g in (Group.BASELINE, Group.COMPARISON):
        label = cfg.baseline_label if g == Group.BASELINE else cfg.comparison_label
        idx = np.flatnonzero(data.group == g)
        if idx.size == 0:
            raise PipelineError("empty_group", f"{label} group empty in test data")
        tables[label] = confusion_table(data.y[idx], fc.point[idx])
        props[label] = proportions_from_codes(fc.set_codes[idx])
        if data.has_counterfactual:
            cf[label] = confusion_table(data.y_star[idx], fc.point[idx])
    note = ("Comparison rows scored on transported covariates." if fc.transported
            else "Comparison rows scored on their own covariates (no transport).")
    return ParityReport(tables, props, cf or None, [note])


def cmd_evaluate(cfg: PipelineConfig, test_path: str | Path) -> ParityReport:
    model, cal, mp = _scoring_artifacts(cfg)
    data = _load_scoring_data(cfg, test_path, labeled=True)
    fc = forecast_dataset(data, model, cal, mp)
    report = evaluate_forecast(data, fc, cfg)
    write_report(report, cfg.out_path, report_prefix(cfg))
    return report


def write_report(report: ParityReport, out: Path, prefix: str = "report") -> None:
    for suffix, text in ((".txt", report.text()), (".csv", report.to_csv()),
                         (".json", json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")):
        path = out / (prefix + suffix)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(path)


def cmd_report(cfg: PipelineConfig, fmt: str = "text") -> str:
    """Render the saved evaluation report as plain text or CSV."""
    payload = _read_json(cfg.out_path / (report_prefix(cfg) + ".json"), "run evaluate first")
    report = ParityReport.from_dict(payload)
    if fmt == "text":
        return report.text()
    if fmt == "csv":
        return report.to_csv()
    raise ValueError("format must be 'text' or 'csv'")


# ------------------------------------------------------------------ end to end


def run_pipeline(cfg: PipelineConfig, test_path: str | Path) -> ParityReport:
    """fit, transport (when enabled), calibrate and evaluate in one go."""
    cmd_fit(cfg)
    if cfg.use_transport:
        cmd_transport(cfg)
    cmd_calibrate(cfg)
    return cmd_evaluate(cfg, test_path)

