import numpy as np
import pytest
from scipy import stats

from fairrisk.transport import (
    BudgetExceeded,
    ForestSettings,
    apply_map,
    barycentric_project,
    batched_fit_map,
    fit_smoothed_map,
    solve_coupling,
    transport_points,
)

FAST = ForestSettings(n_trees=50)


def test_max_features_is_a_third_rounded_up():
    f = ForestSettings()
    assert (f.n_trees, f.min_leaf) == (200, 5)
    assert [f.max_features(d) for d in (1, 2, 3, 4, 7)] == [1, 1, 1, 2, 3]


def test_linear_map_recovered_one_dimension(rng):
    X = rng.uniform(0, 10, size=(500, 1))
    Y = 1.5 * X + 4.0
    mp = fit_smoothed_map(X, Y, seed=1)
    probe = rng.uniform(0, 10, size=(2000, 1))
    err = np.abs(mp(probe) - (1.5 * probe + 4.0)).mean(0)
    assert (err <= 0.05 * Y.std(0)).all()


def test_linear_map_two_dimensions(rng):
    # the default forest (one candidate feature per split here) is coarser in d > 1
    A = np.array([[1.5, 0.3], [-0.2, 0.8]])
    b = np.array([4.0, -1.0])
    X = rng.uniform(0, 10, size=(500, 2))
    Y = X @ A.T + b
    mp = fit_smoothed_map(X, Y, seed=1)
    probe = rng.uniform(0, 10, size=(2000, 2))
    err = np.abs(mp(probe) - (probe @ A.T + b)).mean(0)
    assert (err <= 0.15 * Y.std(0)).all()


def test_constant_target(rng):
    X = rng.normal(size=(40, 3))
    mp = fit_smoothed_map(X, np.tile([2.0, -1.0, 0.5], (40, 1)), seed=0, forest=FAST)
    out = mp(rng.normal(size=(10, 3)) * 100)
    assert np.array_equal(out, np.tile([2.0, -1.0, 0.5], (10, 1)))


def test_same_seed_same_map(rng):
    X, Y = rng.normal(size=(60, 2)), rng.normal(size=(60, 2))
    a = fit_smoothed_map(X, Y, seed=4, forest=FAST)
    b = fit_smoothed_map(X, Y, seed=4, forest=FAST)
    probe = rng.normal(size=(20, 2))
    assert np.array_equal(a(probe), b(probe))


def test_too_few_pairs(rng):
    with pytest.raises(ValueError, match="20"):
        fit_smoothed_map(rng.normal(size=(19, 2)), rng.normal(size=(19, 2)))


def test_apply_at_training_points_is_close(rng):
    X = rng.gamma(2, 3, size=(300, 2))
    c = solve_coupling(X, rng.gamma(2, 3, size=(300, 2)) + 2)
    Yhat = barycentric_project(c)
    mp = fit_smoothed_map(X, Yhat, seed=0, forest=FAST)
    resid = np.abs(mp(X) - Yhat).mean(0)
    # in-sample residual is reported, not bounded tightly
    assert (resid < Yhat.std(0)).all()


def test_apply_map_vector_and_dimension_check(rng):
    mp = fit_smoothed_map(rng.normal(size=(30, 2)), rng.normal(size=(30, 2)), forest=FAST)
    assert apply_map(mp, np.zeros(2)).shape == (2,)
    with pytest.raises(ValueError, match="dimension"):
        apply_map(mp, np.zeros(3))
    with pytest.raises(ValueError, match="dimension"):
        mp(np.zeros((4, 3)))


def test_out_of_range_input_stays_in_hull(rng):
    X = rng.uniform(18, 60, size=(200, 1))
    Y = X + rng.normal(size=(200, 1))
    mp = fit_smoothed_map(X, Y, forest=FAST)
    out = apply_map(mp, np.array([95.0]))
    assert np.isfinite(out).all()
    assert Y.min() <= out[0] <= Y.max()


def test_identity_in_distribution(rng):
    src, dst = rng.gamma(2, 3, size=(2000, 2)), rng.gamma(2, 3, size=(2000, 2))
    mp = batched_fit_map(src, dst, 1, 2000, seed=0)
    fresh = rng.gamma(2, 3, size=(2000, 2))
    out = mp(fresh)
    for k in range(2):
        assert stats.ks_2samp(out[:, k], dst[:, k]).statistic <= 0.1


def test_single_batch_equals_unbatched_path(rng):
    X, Y = rng.normal(size=(60, 2)), rng.normal(size=(60, 2)) + 3
    batched = batched_fit_map(X, Y, 1, 60, seed=5, forest=FAST)
    direct = fit_smoothed_map(X, barycentric_project(solve_coupling(X, Y)), seed=5, forest=FAST)
    probe = rng.normal(size=(25, 2))
    assert np.array_equal(batched(probe), direct(probe))


def test_batches_agree_with_one_large_solve(rng):
    shift = np.array([2.0, -1.0])
    X = rng.normal(size=(2000, 2))
    Y = rng.normal(size=(2000, 2)) + shift
    one = batched_fit_map(X, Y, 1, 2000, seed=0)
    ten = batched_fit_map(X, Y, 10, 200, seed=0)
    probe = rng.normal(size=(500, 2))
    diff = np.linalg.norm(one(probe) - ten(probe), axis=1).mean()
    assert diff <= 0.1 * np.linalg.norm(shift)


def test_mean_averages_member_maps(rng):
    X, Y = rng.normal(size=(120, 2)), rng.normal(size=(120, 2))
    mp = batched_fit_map(X, Y, 3, 40, seed=2, forest=FAST)
    probe = rng.normal(size=(7, 2))
    assert len(mp.maps) == 3
    assert np.allclose(mp(probe), np.mean([m(probe) for m in mp.maps], axis=0))
    pooled = batched_fit_map(X, Y, 3, 40, seed=2, averaging="pool", forest=FAST)
    assert len(pooled.maps) == 1 and pooled.maps[0].source.shape[0] == 120


def test_batches_are_disjoint(rng):
    mp = batched_fit_map(rng.normal(size=(100, 1)), rng.normal(size=(90, 1)), 3, 30, seed=1, forest=FAST)
    src = np.concatenate([s for s, _ in mp.batches])
    dst = np.concatenate([d for _, d in mp.batches])
    assert np.unique(src).size == 90 and np.unique(dst).size == 90


def test_too_few_records(rng):
    with pytest.raises(ValueError, match="need 2000"):
        batched_fit_map(rng.normal(size=(50, 2)), rng.normal(size=(50, 2)), 10, 200)


def test_batch_budget(rng):
    with pytest.raises(BudgetExceeded):
        batched_fit_map(rng.normal(size=(50, 2)), rng.normal(size=(50, 2)), 1, 50, memory_budget=100)


def test_bad_averaging(rng):
    with pytest.raises(ValueError):
        batched_fit_map(rng.normal(size=(50, 2)), rng.normal(size=(50, 2)), 1, 30, averaging="median")


def test_transport_points_equal_sizes_is_a_permutation(rng):
    X, Y = rng.normal(size=(90, 3)), rng.normal(size=(90, 3)) + 1
    out = transport_points(X, Y, n_batches=3, seed=0)
    assert out.shape == X.shape
    assert sorted(map(tuple, out)) == sorted(map(tuple, Y))


def test_transport_points_validates_batches(rng):
    with pytest.raises(ValueError):
        transport_points(rng.normal(size=(5, 1)), rng.normal(size=(5, 1)), n_batches=6)
