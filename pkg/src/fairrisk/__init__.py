"""Fair risk assessment: a classifier trained on the baseline group, optimal
transport of comparison-group covariates onto the baseline distribution, and
split conformal prediction sets, with parity metrics and a synthetic harness."""

from .boosting import BoostConfig, ProbModel, predict_proba, train
from .conformal import ConformalCalibration, calibrate, predict_set, set_proportions
from .metrics import ParityReport, confusion_table, joint_transport_confusion, prediction_parity_gap
from .synth import SynthConfig, generate
from .tabular import Dataset, Group, Schema, load_csv, save_csv, split
from .transport import batched_fit_map, diagnose_marginals, fit_smoothed_map, solve_coupling

__version__ = "0.1.0"

__all__ = [
    "BoostConfig",
    "ProbModel",
    "predict_proba",
    "train",
    "ConformalCalibration",
    "calibrate",
    "predict_set",
    "set_proportions",
    "ParityReport",
    "confusion_table",
    "joint_transport_confusion",
    "prediction_parity_gap",
    "SynthConfig",
    "generate",
    "Dataset",
    "Group",
    "Schema",
    "load_csv",
    "save_csv",
    "split",
    "batched_fit_map",
    "diagnose_marginals",
    "fit_smoothed_map",
    "solve_coupling",
]
