#!/usr/bin/env python
# coding: utf-8

"""
Evaluation metrics: confusion counts, precision, recall, F1 and a histogram
KL-divergence estimator for class-conditional feature distributions.

Undefined metrics (zero denominators) are None, written as NA in CSV files.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from gal_data import Dataset, FeatureId, Label, project

logger = logging.getLogger('galloping_prediction')

NA = 'NA'
REPORT_COLUMNS = ('tp', 'fp', 'fn', 'tn', 'precision', 'recall', 'f1')


@dataclass(frozen=True)
class LabeledPrediction:
    true_label: Label
    predicted_label: Label

    def __post_init__(self):
        object.__setattr__(self, 'true_label', Label(int(self.true_label)))
        object.__setattr__(self, 'predicted_label', Label(int(self.predicted_label)))


@dataclass(frozen=True)
class MetricsReport:
    """Confusion counts plus precision, recall and F1 (None when undefined)."""
    tp: int
    fp: int
    fn: int
    tn: int
    precision: Optional[float] = None
    recall: Optional[float] = None
    f1: Optional[float] = None

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int) -> 'MetricsReport':
        counts = cls(int(tp), int(fp), int(fn), int(tn))
        p = precision(counts)
        r = recall(counts)
        return cls(counts.tp, counts.fp, counts.fn, counts.tn, p, r, f1(p, r))


def confusion(pairs: Iterable[LabeledPrediction]) -> MetricsReport:
    """Count tp/fp/fn/tn over (true, predicted) pairs; metrics left unset."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("Cannot build a confusion matrix from an empty prediction list")
    tp = fp = fn = tn = 0
    for pair in pairs:
        if pair.true_label == Label.GALLOPING:
            if pair.predicted_label == Label.GALLOPING:
                tp += 1
            else:
                fn += 1
        elif pair.predicted_label == Label.GALLOPING:
            fp += 1
        else:
            tn += 1
    return MetricsReport(tp, fp, fn, tn)


def recall(report: MetricsReport) -> Optional[float]:
    denominator = report.tp + report.fn
    return report.tp / denominator if denominator else None


def precision(report: MetricsReport) -> Optional[float]:
    denominator = report.tp + report.fp
    return report.tp / denominator if denominator else None


def f1(precision_value: Optional[float], recall_value: Optional[float]) -> Optional[float]:
    """Harmonic mean of precision and recall; None if either is undefined or both are 0."""
    if precision_value is None or recall_value is None:
        return None
    for name, value in (('precision', precision_value), ('recall', recall_value)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {value}")
    if precision_value == 0.0 and recall_value == 0.0:
        return None
    return 2.0 * precision_value * recall_value / (precision_value + recall_value)


def metrics_from_predictions(y_true: np.ndarray, y_pred: np.ndarray) -> MetricsReport:
    """Full report from label arrays in {+1, -1}."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape:
        raise ValueError("True and predicted label arrays differ in length")
    if y_true.size == 0:
        raise ValueError("Cannot build a confusion matrix from an empty prediction list")

    positive_true = y_true == int(Label.GALLOPING)
    positive_pred = y_pred == int(Label.GALLOPING)
    return MetricsReport.from_counts(
        tp=np.count_nonzero(positive_true & positive_pred),
        fp=np.count_nonzero(~positive_true & positive_pred),
        fn=np.count_nonzero(positive_true & ~positive_pred),
        tn=np.count_nonzero(~positive_true & ~positive_pred))


def kl_divergence(p_values: Sequence[float], q_values: Sequence[float], bins: int = 20) -> float:
    """
    Histogram estimate of KL(P || Q) in nats.

    Both samples share `bins` equal-width bins over their pooled range. Each
    histogram gets 1/N pseudo-mass per bin (N = its sample count) before
    normalizing, so empty bins never produce infinities.

    Args:
        p_values: Sample from P
        q_values: Sample from Q
        bins: Number of bins (>= 2)

    Returns:
        Non-negative divergence; 0.0 if all pooled values are identical
    """
    p = np.asarray(p_values, dtype=float).ravel()
    q = np.asarray(q_values, dtype=float).ravel()
    if p.size == 0 or q.size == 0:
        raise ValueError("KL divergence needs two nonempty samples")
    if bins < 2:
        raise ValueError(f"bins must be at least 2, got {bins}")

    low = min(p.min(), q.min())
    high = max(p.max(), q.max())
    edges = np.linspace(low, high, bins + 1)
    if low == high or np.any(np.diff(edges) <= 0):
        logger.warning("KL divergence requested on a degenerate range (all values identical); returning 0")
        return 0.0

    p_counts, _ = np.histogram(p, bins=edges)
    q_counts, _ = np.histogram(q, bins=edges)

    p_hat = (p_counts + 1.0) / (p.size + bins)
    q_hat = (q_counts + 1.0) / (q.size + bins)
    divergence = float(np.sum(p_hat * np.log(p_hat / q_hat)))
    return max(divergence, 0.0)


def evaluate(model, test: Dataset) -> MetricsReport:
    """
    Predict every test sample with model and score the predictions.

    The test set must already be standardized like the model's training
    data; it is projected onto the model's feature mask when it holds more
    columns.
    """
    from gal_svm import predict_array

    if len(test) == 0:
        raise ValueError("Cannot evaluate on an empty test set")
    if test.columns != model.features.columns:
        test = project(test, model.features)
    report = metrics_from_predictions(test.y, predict_array(model, test.X))
    logger.debug(f"Evaluated {report.total} samples: tp={report.tp} fp={report.fp} "
                 f"fn={report.fn} tn={report.tn} f1={format_metric(report.f1)}")
    return report


def _mean_defined(values: Iterable[Optional[float]]) -> Optional[float]:
    defined = [v for v in values if v is not None]
    return sum(defined) / len(defined) if defined else None


def summarize(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Counts summed; precision, recall and F1 averaged over their defined values."""
    if not reports:
        raise ValueError("Nothing to summarize")
    return MetricsReport(
        tp=sum(r.tp for r in reports),
        fp=sum(r.fp for r in reports),
        fn=sum(r.fn for r in reports),
        tn=sum(r.tn for r in reports),
        precision=_mean_defined(r.precision for r in reports),
        recall=_mean_defined(r.recall for r in reports),
        f1=_mean_defined(r.f1 for r in reports))


def class_separation(dataset: Dataset, bins: int = 20) -> pd.DataFrame:
    """
    Per-feature KL(galloping || normal), sorted from most to least separated.

    Returns:
        DataFrame with columns feature, unit, kl_divergence
    """
    galloping = dataset.with_label_indices(Label.GALLOPING)
    normal = dataset.with_label_indices(Label.NORMAL)
    if len(galloping) == 0 or len(normal) == 0:
        raise ValueError("Class separation needs samples of both classes")

    X = dataset.X
    rows: List[Dict[str, object]] = []
    for position, column in enumerate(dataset.columns):
        rows.append({'feature': column, 'unit': FeatureId.from_column(column).unit,
                     'kl_divergence': kl_divergence(X[galloping, position], X[normal, position], bins)})
    table = pd.DataFrame(rows, columns=['feature', 'unit', 'kl_divergence'])
    return table.sort_values(['kl_divergence', 'feature'], ascending=[False, True], kind='mergesort') \
        .reset_index(drop=True)


def format_metric(value: Optional[float]) -> str:
    return NA if value is None else repr(float(value))


def report_header() -> List[str]:
    return list(REPORT_COLUMNS)


def report_to_row(report: Optional[MetricsReport]) -> List[str]:
    """One CSV row `tp,fp,fn,tn,precision,recall,f1`, NA for undefined (or missing) values."""
    if report is None:
        return [NA] * len(REPORT_COLUMNS)
    return [str(report.tp), str(report.fp), str(report.fn), str(report.tn),
            format_metric(report.precision), format_metric(report.recall), format_metric(report.f1)]


def is_better_f1(candidate: Optional[float], incumbent: Optional[float]) -> bool:
    """Ordering used for model and mask selection: undefined F1 ranks last."""
    if candidate is None:
        return False
    return incumbent is None or candidate > incumbent
