"""
Tests for gal_metrics: confusion arithmetic, undefined markers, KL estimator, evaluation.
"""

import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gal_data import Dataset, FeatureMask
from gal_metrics import (LabeledPrediction, MetricsReport, class_separation, confusion, evaluate, f1,
                         kl_divergence, metrics_from_predictions, precision, recall, report_header,
                         report_to_row, summarize)
from gal_svm import KernelParams, SvmModel

labels = st.sampled_from([1, -1])
pairs = st.lists(st.tuples(labels, labels), min_size=1, max_size=60)


def _pairs(items):
    return [LabeledPrediction(t, p) for t, p in items]


def test_confusion_counts():
    report = confusion(_pairs([(1, 1), (1, -1), (-1, -1), (-1, 1)]))
    assert (report.tp, report.fn, report.tn, report.fp) == (1, 1, 1, 1)

    correct = confusion(_pairs([(1, 1), (-1, -1), (-1, -1)]))
    assert correct.fp == 0 and correct.fn == 0

    with pytest.raises(ValueError):
        confusion([])


def test_flipping_predictions_swaps_counts():
    items = [(1, 1), (1, 1), (1, -1), (-1, -1), (-1, 1), (-1, -1)]
    report = confusion(_pairs(items))
    flipped = confusion(_pairs([(t, -p) for t, p in items]))
    assert (flipped.tp, flipped.fn, flipped.tn, flipped.fp) == (report.fn, report.tp, report.fp, report.tn)


def test_recall_precision_and_undefined():
    assert recall(MetricsReport(tp=1, fp=0, fn=1, tn=0)) == 0.5
    assert precision(MetricsReport(tp=3, fp=1, fn=0, tn=0)) == 0.75
    assert precision(MetricsReport(tp=0, fp=0, fn=4, tn=2)) is None
    assert recall(MetricsReport(tp=0, fp=3, fn=0, tn=2)) is None


def test_f1_values():
    assert f1(1.0, 1.0) == 1.0
    assert f1(0.5, 1.0) == pytest.approx(2 / 3, abs=1e-15)
    assert f1(0.3, 0.3) == pytest.approx(0.3, abs=1e-15)
    assert f1(0.0, 0.0) is None
    assert f1(None, 0.5) is None
    with pytest.raises(ValueError):
        f1(1.5, 0.5)


def test_metrics_match_hand_arithmetic():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        y_true = rng.choice([1, -1], n)
        y_pred = rng.choice([1, -1], n)
        report = metrics_from_predictions(y_true, y_pred)

        tp = int(np.sum((y_true == 1) & (y_pred == 1)))
        fp = int(np.sum((y_true == -1) & (y_pred == 1)))
        fn = int(np.sum((y_true == 1) & (y_pred == -1)))
        assert (report.tp, report.fp, report.fn) == (tp, fp, fn)
        assert report.total == n

        if tp + fp:
            assert abs(report.precision - tp / (tp + fp)) <= 1e-12
        else:
            assert report.precision is None
        if tp + fn:
            assert abs(report.recall - tp / (tp + fn)) <= 1e-12
        else:
            assert report.recall is None
        if tp:
            assert abs(report.f1 - 2 * tp / (2 * tp + fp + fn)) <= 1e-12
        else:
            assert report.f1 is None


@given(pairs, st.randoms(use_true_random=False))
def test_confusion_is_permutation_invariant(items, random):
    shuffled = list(items)
    random.shuffle(shuffled)
    assert confusion(_pairs(items)) == confusion(_pairs(shuffled))


@given(st.floats(0, 1), st.floats(0, 1))
def test_f1_symmetric_and_bounded(p, r):
    value = f1(p, r)
    assert value == f1(r, p)
    if value is not None:
        assert value <= 2 * min(p, r) + 1e-12
        assert 0.0 <= value <= 1.0 + 1e-12


def test_kl_identical_samples_is_zero():
    values = np.random.default_rng(1).normal(size=500)
    assert abs(kl_divergence(values, values, 20)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50),
       st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
def test_kl_is_non_negative(p, q):
    assert kl_divergence(p, q, 10) >= 0.0


def test_kl_gaussian_shift_close_to_closed_form():
    rng = np.random.default_rng(7)
    p = rng.normal(0.0, 1.0, 10000)
    q = rng.normal(3.0, 1.0, 10000)
    assert abs(kl_divergence(p, q, 20) - 4.5) <= 0.25 * 4.5


def test_kl_degenerate_range_warns(gal_log):
    assert kl_divergence([2.0, 2.0], [2.0], 20) == 0.0
    assert any(r.levelno == logging.WARNING and 'degenerate' in r.getMessage() for r in gal_log.records)


def test_kl_argument_checks():
    with pytest.raises(ValueError):
        kl_divergence([], [1.0], 20)
    with pytest.raises(ValueError):
        kl_divergence([1.0], [2.0], 1)


def _always_galloping_model():
    return SvmModel(support_vectors=np.zeros((1, 1)), dual_coefficients=np.array([1.0]), bias=0.5,
                    kernel=KernelParams(1.0), features=FeatureMask.from_names(['wind_speed']), c=10.0)


def test_evaluate_with_constant_predictor():
    model = _always_galloping_model()
    all_galloping = Dataset.from_arrays(np.linspace(-3, 3, 8).reshape(-1, 1), np.ones(8, dtype=int),
                                        columns=('wind_speed',))
    assert evaluate(model, all_galloping).recall == 1.0

    y = np.array([1, 1, 1, -1, -1, -1, -1, -1, -1, -1])
    mixed = Dataset.from_arrays(np.linspace(-3, 3, 10).reshape(-1, 1), y, columns=('wind_speed',))
    report = evaluate(model, mixed)
    assert report.precision == pytest.approx(0.3)
    assert report.total == len(mixed)


def test_summarize_sums_counts_and_averages_defined_metrics():
    first = MetricsReport.from_counts(tp=3, fp=1, fn=1, tn=5)
    second = MetricsReport.from_counts(tp=0, fp=0, fn=2, tn=8)
    summary = summarize([first, second])
    assert (summary.tp, summary.fp, summary.fn, summary.tn) == (3, 1, 3, 13)
    assert summary.precision == first.precision
    assert summary.recall == pytest.approx((0.75 + 0.0) / 2)
    assert summary.f1 == first.f1


def test_report_row_format():
    report = MetricsReport.from_counts(tp=0, fp=0, fn=2, tn=3)
    assert report_header() == ['tp', 'fp', 'fn', 'tn', 'precision', 'recall', 'f1']
    assert report_to_row(report) == ['0', '0', '2', '3', 'NA', '0.0', 'NA']
    assert report_to_row(None) == ['NA'] * 7


def test_class_separation_table(small_synthetic):
    table = class_separation(small_synthetic, 20)
    assert list(table.columns) == ['feature', 'unit', 'kl_divergence']
    assert len(table) == 7
    units = dict(zip(table['feature'], table['unit']))
    assert units['temperature'] == 'degC' and units['wind_speed'] == 'm/s'
    assert (table['kl_divergence'] >= 0).all()
    assert table['kl_divergence'].is_monotonic_decreasing
