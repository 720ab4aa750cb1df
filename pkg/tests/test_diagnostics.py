import csv

import numpy as np
import pytest

from fairrisk.synth import SynthConfig, generate
from fairrisk.tabular import Dataset, Group, filter_group
from fairrisk.transport import diagnose_marginals, overlap_coefficient, shared_histogram, transport_points

from .oracles import normal_overlap


def test_identical_samples_overlap_one(rng):
    a = rng.gamma(2, 3, 500)
    assert overlap_coefficient(a, a) == 1.0


def test_disjoint_supports_overlap_zero(rng):
    assert overlap_coefficient(rng.uniform(0, 1, 300), rng.uniform(5, 6, 300)) == 0.0


def test_normal_shift_matches_min_density_integral():
    rng = np.random.default_rng(8)
    est = overlap_coefficient(rng.normal(size=4000), rng.normal(size=4000) + 3.0, n_bins=30)
    assert abs(est - normal_overlap(3.0)) <= 0.05
    assert normal_overlap(3.0) == pytest.approx(0.1336, abs=1e-4)


def test_histogram_counts_and_csv(tmp_path, rng):
    a, b = rng.normal(size=200), rng.normal(size=300)
    h = shared_histogram(a, b, n_bins=12, feature="age")
    assert h.counts_a.sum() == 200 and h.counts_b.sum() == 300
    assert len(h.edges) == 13
    h.to_csv(tmp_path / "h.csv")
    rows = list(csv.reader((tmp_path / "h.csv").open()))
    assert rows[0] == ["bin_left", "bin_right", "count_a", "count_b"]
    assert len(rows) == 1 + 12 + 1
    assert rows[-1][0] == "overlap" and float(rows[-1][2]) == h.overlap


def test_overlap_in_unit_interval(rng):
    for _ in range(20):
        v = overlap_coefficient(rng.normal(size=50), rng.normal(size=70) * 2 + rng.normal())
        assert 0.0 <= v <= 1.0


def test_diagnose_marginals_by_name(rng):
    a = Dataset(rng.normal(size=(30, 2)), [0] * 30, [0] * 30, ("age", "priors"))
    h = diagnose_marginals(a, a, "priors", n_bins=5)
    assert h.overlap == 1.0 and h.feature == "priors"
    with pytest.raises(KeyError):
        diagnose_marginals(a, a, "height")


def test_transport_closes_marginal_gap():
    # a strongly shifted configuration: every feature starts below 0.85 overlap
    data = generate(SynthConfig(n_per_group=2000, shift=(-5.0, 4.0, 1.0, -3.0), seed=21))
    base, comp = filter_group(data, Group.BASELINE), filter_group(data, Group.COMPARISON)
    moved = transport_points(comp.X, base.X, n_batches=2, seed=0)
    for k in range(4):
        assert overlap_coefficient(base.X[:, k], comp.X[:, k]) <= 0.85
        assert overlap_coefficient(base.X[:, k], moved[:, k]) >= 0.95
