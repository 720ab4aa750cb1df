import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairrisk.conformal import SetProportions
from fairrisk.metrics import (
    OBSERVABILITY_NOTE,
    ConfusionTable,
    ParityReport,
    UndefinedRate,
    classification_error,
    confusion_table,
    counterfactual_classification_error,
    forecasting_error,
    joint_transport_confusion,
    prediction_parity_gap,
)
from fairrisk.tabular import Group, filter_group

# rows = actual outcome, columns = forecast
REFERENCE = ConfusionTable(np.array([[31630, 11246], [1527, 1975]]))


def test_reference_table_rates():
    assert round(forecasting_error(REFERENCE, 0), 3) == 0.046
    assert round(forecasting_error(REFERENCE, 1), 3) == 0.851
    assert round(classification_error(REFERENCE, 0), 3) == 0.262
    # row 1 computed from the counts
    assert round(classification_error(REFERENCE, 1), 3) == 0.436
    assert round(REFERENCE.cost_ratio, 2) == 7.36


def test_counts_reconstructed_from_rates():
    c = REFERENCE.counts
    fn = forecasting_error(REFERENCE, 0) * c[:, 0].sum()
    fp = classification_error(REFERENCE, 0) * c[0].sum()
    assert round(fn) == 1527 and round(fp) == 11246


def test_confusion_from_vectors():
    t = confusion_table([0, 0, 1, 1, 1], [0, 1, 0, 1, 1])
    assert t.counts.tolist() == [[1, 1], [1, 2]]
    assert t.n == 5 and t.false_positives == 1 and t.false_negatives == 1
    assert t.base_rate == 0.6 and t.predicted_positive_rate == 0.6


def test_length_mismatch():
    with pytest.raises(ValueError, match="length"):
        confusion_table([0, 1], [0])


def test_non_binary_labels():
    with pytest.raises(ValueError):
        confusion_table([0, 2], [0, 1])


def test_undefined_rates():
    t = confusion_table([0, 0, 0], [0, 0, 1])
    with pytest.raises(UndefinedRate):
        classification_error(t, 1)
    with pytest.raises(UndefinedRate):
        t.cost_ratio
    assert "undef" in t.text()


def test_table_rejects_bad_shape():
    with pytest.raises(ValueError):
        ConfusionTable(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        ConfusionTable(np.array([[1, -1], [0, 0]]))


def test_parity_gap_reference_columns():
    baseline = [0.0, 0.58, 0.03, 0.39]
    transported = [0.0, 0.58, 0.03, 0.39]
    smoothed = [0.0, 0.54, 0.03, 0.43]
    assert prediction_parity_gap(baseline, transported) == 0.0
    assert prediction_parity_gap(baseline, smoothed) == pytest.approx(0.04)


_simplex = st.lists(st.integers(0, 50), min_size=4, max_size=4).filter(lambda v: sum(v) > 0).map(
    lambda v: [x / sum(v) for x in v])


@settings(max_examples=100, deadline=None)
@given(a=_simplex, b=_simplex, c=_simplex)
def test_parity_gap_is_a_metric(a, b, c):
    ab = prediction_parity_gap(a, b)
    assert 0.0 <= ab <= 1.0 + 1e-12
    assert ab == prediction_parity_gap(b, a)
    assert prediction_parity_gap(a, a) == 0.0
    assert ab <= prediction_parity_gap(a, c) + prediction_parity_gap(c, b) + 1e-12


def test_parity_gap_validates():
    with pytest.raises(ValueError):
        prediction_parity_gap([0.5, 0.5, 0.5, 0.0], [0.25] * 4)
    with pytest.raises(ValueError):
        prediction_parity_gap([1.0, 0.0, 0.0], [0.25] * 4)


def test_counterfactual_equals_observed_when_identical(rng):
    y = rng.integers(0, 2, 200)
    yhat = rng.integers(0, 2, 200)
    t = confusion_table(y, yhat)
    for k in (0, 1):
        assert counterfactual_classification_error(yhat, y, k) == classification_error(t, k)


def test_counterfactual_absent():
    with pytest.raises(ValueError, match="simulated"):
        counterfactual_classification_error([0, 1], None, 0)
    with pytest.raises(ValueError, match="missing"):
        counterfactual_classification_error([0, 1], [0, -1], 0)


def _report(cf=True):
    a = confusion_table([0, 0, 1, 1, 0, 1], [0, 1, 1, 0, 0, 1])
    b = confusion_table([0, 0, 0, 1, 1, 1, 1], [0, 1, 1, 1, 0, 1, 1])
    props = {"baseline": SetProportions(0.0, 0.5, 0.1, 0.4), "comparison": SetProportions(0.0, 0.3, 0.2, 0.5)}
    return ParityReport({"baseline": a, "comparison": b}, props,
                        {"baseline": a, "comparison": b} if cf else None, ["seed 0"])


def test_report_gaps():
    r = _report()
    g = r.gaps()
    assert g["prediction_parity_tv"] == pytest.approx(0.2)
    assert g["classification_error_0"] == pytest.approx(abs(1 / 3 - 2 / 3))
    assert set(g) == {"prediction_parity_tv", "classification_error_0", "classification_error_1",
                      "forecasting_error_0", "forecasting_error_1", "cost_ratio"}


def test_report_text_and_csv():
    r = _report()
    txt = r.text()
    assert "Internal fairness only" in txt and "Counterfactual classification error" in txt
    assert "seed 0" in txt
    rows = r.to_csv().splitlines()
    assert rows[0] == "block,group,key,value"
    assert any(row.startswith("gap,,prediction_parity_tv,0.2") for row in rows)
    assert OBSERVABILITY_NOTE in _report(cf=False).text()


def test_report_dict_round_trip():
    r = _report()
    back = ParityReport.from_dict(json.loads(json.dumps(r.to_dict())))
    assert back.to_csv() == r.to_csv()
    assert back.text() == r.text()


def test_joint_transport_identical_distributions(synth_small, small_model):
    base = filter_group(synth_small, Group.BASELINE)
    a, b = joint_transport_confusion(base, base, small_model)
    assert np.array_equal(a.counts, b.counts)
