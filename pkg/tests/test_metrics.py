import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsitcyto import metrics
from lsitcyto.errors import DataError, DimensionError, UndefinedReferenceError
from lsitcyto.metrics import ClassMetrics, class_metrics, confusion, pairwise_auc, roc_auc, roc_curve, snr_imp
from reference_data import REFERENCE_ROWS


@pytest.mark.parametrize("name", sorted(REFERENCE_ROWS))
def test_reference_rows(name):
    counts, expected = REFERENCE_ROWS[name]
    m = ClassMetrics(*counts)
    got = [getattr(m, f) for f in ClassMetrics.FIELDS]
    assert np.allclose(got, expected, atol=5e-5, rtol=0)


def test_zero_denominators_are_absent():
    m = ClassMetrics(0, 10, 0, 0)
    assert m.precision is None and m.recall is None and m.f1 is None
    assert m.specificity == 1.0 and m.accuracy == 1.0


def test_class_metrics_from_matrix():
    cm = confusion([0, 0, 1, 1, 2, 2, 2], [0, 1, 1, 1, 2, 0, 2], 3)
    rows = class_metrics(cm)
    assert [(r.tp, r.fp, r.fn) for r in rows] == [(1, 1, 1), (2, 1, 0), (2, 0, 1)]
    assert all(r.tp + r.tn + r.fp + r.fn == 7 for r in rows)
    assert math.isclose(cm.accuracy(), 5 / 7)
    assert np.allclose(cm.per_class_recall(), [0.5, 1.0, 2 / 3])


def test_confusion_rejects_bad_labels():
    with pytest.raises(DataError):
        confusion([0, 3], [0, 1], 3)
    with pytest.raises(DimensionError):
        confusion([0, 1], [0], 3)


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=60))
def test_confusion_totals(pairs):
    t, p = zip(*pairs)
    cm = confusion(t, p, 4)
    assert cm.counts.sum() == len(pairs)
    assert np.array_equal(cm.counts.sum(axis=1), np.bincount(t, minlength=4))
    for r in class_metrics(cm):
        assert r.tp + r.tn + r.fp + r.fn == len(pairs)


# -- SNR ----------------------------------------------------------------------


def test_snr_worked_example():
    rep = snr_imp(np.array([3.0, 4.0]), np.array([3.0, 5.0]), np.array([3.0, 4.5]))
    assert abs(rep.mean - 20 * math.log10(2)) < 1e-9
    assert abs(rep.mean - 6.0206) < 1e-3


@given(st.integers(0, 2**31 - 1))
def test_snr_identity_is_exactly_zero(seed):
    rng = np.random.default_rng(seed)
    clean = rng.uniform(1, 255, (8, 8))
    noisy = clean + rng.normal(0, 10, clean.shape)
    assert snr_imp(clean, noisy, noisy).mean == 0.0


def test_snr_exact_recovery_capped():
    clean = np.full((4, 4), 100.0)
    rep = snr_imp(clean, clean + 1, clean)
    assert rep.exact_recovery[0]
    assert rep.snr_out[0] == metrics.SNR_CAP_DB


def test_snr_zero_reference():
    with pytest.raises(UndefinedReferenceError):
        snr_imp(np.zeros((3, 3)), np.ones((3, 3)), np.ones((3, 3)))


@given(st.integers(0, 2**31 - 1), st.floats(1.05, 5.0))
def test_snr_monotone_in_input_deviation(seed, factor):
    rng = np.random.default_rng(seed)
    clean = rng.uniform(10, 250, (6, 6))
    dev = rng.normal(0, 5, clean.shape)
    den = clean + rng.normal(0, 1, clean.shape)
    a = snr_imp(clean, clean + dev, den).mean
    b = snr_imp(clean, clean + factor * dev, den).mean
    assert b > a


def test_snr_stack_is_per_image_mean():
    rng = np.random.default_rng(3)
    c = rng.uniform(50, 200, (5, 7, 7))
    n = c + rng.normal(0, 8, c.shape)
    d = c + rng.normal(0, 3, c.shape)
    each = [snr_imp(c[i], n[i], d[i]).mean for i in range(5)]
    assert math.isclose(snr_imp(c, n, d).mean, np.mean(each), rel_tol=1e-12)


# -- ROC ----------------------------------------------------------------------


def test_roc_separable_and_chance():
    y = np.array([0, 0, 1, 1], dtype=bool)
    assert roc_curve([0.1, 0.2, 0.8, 0.9], y).auc == 1.0
    assert roc_curve([0.5] * 4, y).auc == 0.5


def test_roc_single_class_raises():
    with pytest.raises(DataError):
        roc_curve([0.1, 0.2], [True, True])


@settings(max_examples=60)
@given(st.integers(0, 2**31 - 1))
def test_roc_matches_pairwise_oracle(seed):
    rng = np.random.default_rng(seed)
    y = rng.random(40) < 0.4
    y[0], y[1] = True, False
    s = np.round(rng.random(40), 1)  # coarse rounding forces ties
    assert abs(roc_curve(s, y).auc - pairwise_auc(s, y)) < 1e-9


def test_roc_curve_shape():
    c = roc_curve([0.9, 0.8, 0.8, 0.1], [True, False, True, False])
    assert c.fpr[0] == 0 and c.tpr[0] == 0 and c.fpr[-1] == 1 and c.tpr[-1] == 1
    assert np.all(np.diff(c.fpr) >= 0) and np.all(np.diff(c.tpr) >= 0)
    assert np.isinf(c.thresholds[0])


def test_roc_auc_per_class():
    probs = np.array([[0.8, 0.1, 0.1], [0.2, 0.7, 0.1], [0.1, 0.2, 0.7], [0.6, 0.3, 0.1]])
    curves = roc_auc(probs, [0, 1, 2, 0])
    assert [c.auc for c in curves] == [1.0, 1.0, 1.0]


def test_csv_writers(tmp_path):
    cm = confusion([0, 1, 1], [0, 1, 0], 2, ["a", "b"])
    metrics.write_confusion_csv(tmp_path / "c.csv", cm)
    metrics.write_metrics_csv(tmp_path / "m.csv", cm)
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("class,tp,tn,fp,fn")
    assert (tmp_path / "c.csv").read_text().splitlines()[1] == "a,1,0"
