import json

import numpy as np
import pytest

from fairrisk.boosting import (
    BoostConfig,
    ProbModel,
    derive_case_weights,
    plateau_iteration,
    predict_proba,
    select_iterations,
    train,
    train_arrays,
    weighted_deviance,
)
from fairrisk.synth import SynthConfig, generate
from fairrisk.tabular import Dataset, DataError


def _ds(X, y):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return Dataset(X, np.zeros(len(y), dtype=int), y, tuple(f"x{k}" for k in range(X.shape[1])))


def test_case_weights():
    d = _ds([[0.0], [1.0], [2.0]], [1, 0, 0])
    assert derive_case_weights(d, 8).tolist() == [8.0, 1.0, 1.0]
    assert derive_case_weights(d, 1).tolist() == [1.0, 1.0, 1.0]
    with pytest.raises(ValueError):
        derive_case_weights(d, 0)


def test_case_weights_need_labels():
    d = Dataset(np.zeros((2, 1)), [0, 0], [1, -1], ("x",))
    with pytest.raises(DataError):
        derive_case_weights(d, 8)


@pytest.mark.parametrize("kwargs", [dict(n_trees=0), dict(learning_rate=0), dict(learning_rate=1.5),
                                    dict(max_depth=0), dict(subsample=0), dict(cost_ratio=0), dict(cost_ratio=-1)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        BoostConfig(**kwargs)


def test_single_class_rejected():
    with pytest.raises(DataError):
        train(_ds(np.arange(20.0), [0] * 20), BoostConfig(n_trees=2))


def test_no_covariates_rejected():
    with pytest.raises(DataError):
        train_arrays(np.zeros((4, 0)), [0, 1, 0, 1], np.ones(4), BoostConfig(n_trees=2))


def test_separable_toy_training_accuracy():
    # covariates from the generator, labels from a linear rule
    base = generate(SynthConfig(n_per_group=100, d=2, shift=(0.0, 0.0), outcome_coefficients=(0, 0, 0), seed=4))
    y = (base.X[:, 0] - base.X[:, 1] > 0).astype(int)
    d = Dataset(base.X, base.group, y, base.feature_names)
    model = train(d, BoostConfig(n_trees=100, max_depth=2, seed=1))
    assert len(d) == 200
    assert (model.predict_label(d.X) == y).mean() >= 0.95


def test_constant_covariates_give_weighted_base_rate():
    y = np.array([1] * 10 + [0] * 70)
    rate = 8 * 10 / (8 * 10 + 70)
    probe = np.array([[1.0], [-5.0], [100.0]])
    model = train(_ds(np.ones(80), y), BoostConfig(n_trees=20, subsample=1.0, seed=2))
    assert np.allclose(model.prob_one(probe), rate, atol=1e-6)
    # row subsampling lets the intercept wander by sampling noise only
    model = train(_ds(np.ones(80), y), BoostConfig(n_trees=20, seed=2))
    assert np.allclose(model.prob_one(probe), rate, atol=0.05)
    assert np.ptp(model.prob_one(probe)) == 0.0


def test_determinism(synth_small):
    cfg = BoostConfig(n_trees=15, max_depth=3, seed=9)
    a, b = train(synth_small, cfg), train(synth_small, cfg)
    assert np.array_equal(a.prob_one(synth_small.X), b.prob_one(synth_small.X))


def test_probability_simplex(small_model, rng):
    X = rng.uniform(-50, 120, size=(10_000, small_model.n_features))
    P = small_model.predict_proba_many(X)
    assert ((P >= 0) & (P <= 1)).all()
    assert np.abs(P.sum(1) - 1.0).max() <= 1e-12
    p0, p1 = predict_proba(small_model, X[0])
    assert abs(p0 + p1 - 1.0) <= 1e-12


def test_dimension_mismatch(small_model):
    with pytest.raises(ValueError):
        predict_proba(small_model, np.zeros(small_model.n_features + 1))


def test_monotone_univariate_toy():
    # x = 1..10, twenty rows each; x = k has k positives
    x = np.repeat(np.arange(1.0, 11.0), 20)
    y = np.concatenate([[1] * k + [0] * (20 - k) for k in range(1, 11)])
    model = train(_ds(x, y), BoostConfig(n_trees=50, max_depth=1, subsample=1.0, cost_ratio=1.0))
    p = model.prob_one(np.arange(1.0, 11.0).reshape(-1, 1))
    assert (np.diff(p) >= 0).all()


def test_argmax_tie_goes_to_zero():
    model = ProbModel((), 0.0, BoostConfig(), 2)
    assert model.prob_one(np.zeros((1, 2)))[0] == 0.5
    assert model.predict_label(np.zeros((1, 2)))[0] == 0


def test_weight_replication_equivalence(synth_small):
    cfg = BoostConfig(n_trees=30, max_depth=3, subsample=1.0, cost_ratio=8.0, seed=0)
    weighted = train(synth_small, cfg)
    reps = np.where(synth_small.y == 1, 8, 1)
    idx = np.repeat(np.arange(len(synth_small)), reps)
    dup = synth_small.take(idx)
    replicated = train_arrays(dup.X, dup.y, np.ones(len(dup)), cfg)
    probe = synth_small.X
    assert np.abs(weighted.prob_one(probe) - replicated.prob_one(probe)).max() <= 1e-9


def test_round_trip_bit_exact(tmp_path, small_model, synth_small):
    path = tmp_path / "m.json"
    small_model.save(path)
    back = ProbModel.load(path)
    a = small_model.predict_proba_many(synth_small.X)
    b = back.predict_proba_many(synth_small.X)
    assert np.array_equal(a.view(np.uint64), b.view(np.uint64))
    payload = json.loads(path.read_text())
    assert payload["format"] == "fairrisk-gbt" and payload["version"] == 1
    assert payload["config"]["cost_ratio"] == small_model.config.cost_ratio


def test_load_rejects_foreign_files(small_model):
    d = small_model.to_dict()
    with pytest.raises(ValueError):
        ProbModel.from_dict({**d, "format": "other"})
    with pytest.raises(ValueError):
        ProbModel.from_dict({**d, "version": 99})


def test_truncate_matches_staged(small_model, synth_small):
    staged = list(small_model.staged_decision_function(synth_small.X))
    assert np.allclose(small_model.truncate(7).decision_function(synth_small.X), staged[6])
    with pytest.raises(ValueError):
        small_model.truncate(0)


def test_weighted_deviance_matches_direct_formula(rng):
    y = rng.integers(0, 2, 50).astype(float)
    m = rng.normal(size=50)
    w = rng.uniform(1, 8, 50)
    p = 1 / (1 + np.exp(-m))
    direct = -2 * np.sum(w * (y * np.log(p) + (1 - y) * np.log(1 - p))) / w.sum()
    assert weighted_deviance(y, m, w) == pytest.approx(direct, rel=1e-12)


def test_plateau_strictly_decreasing_returns_length():
    assert plateau_iteration(100 - np.arange(100.0)) == 100


def test_plateau_flat_from_40():
    trace = np.concatenate([100 - np.arange(40.0), np.full(160, 61.0)])
    k = plateau_iteration(trace)
    assert k <= 65
    assert k == 40


def test_select_iterations_single_tree(synth_small):
    model = train(synth_small, BoostConfig(n_trees=1))
    assert select_iterations(model, synth_small) == 1


def test_select_iterations_never_exceeds_n_trees(synth_small, small_model):
    k = select_iterations(small_model, synth_small)
    assert 1 <= k <= len(small_model.trees)
