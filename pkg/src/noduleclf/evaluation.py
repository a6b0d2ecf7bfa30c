"""Confusion-count metrics, ROC curves, and AUC.

Positive means malignant (+1), negative means benign (-1). The F-measure is
the harmonic mean of sensitivity and specificity, not of precision/recall.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass
class ConfusionCounts:
    tp: int
    fn: int
    tn: int
    fp: int

    def __post_init__(self) -> None:
        for name in ("tp", "fn", "tn", "fp"):
            if getattr(self, name) < 0:
                raise ContractError(f"negative confusion count {name}")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.tn + self.fp

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fn": self.fn, "tn": self.tn, "fp": self.fp}


@dataclass
class Metrics:
    sensitivity: float
    specificity: float
    accuracy: float
    f_measure: float

    def to_dict(self) -> dict:
        return {
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "accuracy": self.accuracy,
            "f_measure": self.f_measure,
        }


@dataclass
class RocCurve:
    """Operating points (fpr, tpr) ordered by increasing false-positive rate.

    thresholds[i] is the score cutoff producing point i; the leading (0, 0)
    point carries +inf (nothing predicted positive).
    """

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray


def _check_labels(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ContractError("labels must be a non-empty 1D sequence")
    if not np.all(np.isin(labels, (-1, 1))):
        raise ContractError("labels must be -1 or +1")
    return labels.astype(np.int64)


def confusion(truth, predicted) -> ConfusionCounts:
    """Exact confusion counts for -1/+1 label vectors of equal length."""
    t = _check_labels(truth)
    p = _check_labels(predicted)
    if t.shape != p.shape:
        raise ContractError(f"length mismatch: {t.shape[0]} vs {p.shape[0]}")
    return ConfusionCounts(
        tp=int(np.sum((t == 1) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == -1))),
        tn=int(np.sum((t == -1) & (p == -1))),
        fp=int(np.sum((t == -1) & (p == 1))),
    )


def metrics(c: ConfusionCounts) -> Metrics:
    """Sensitivity, specificity, accuracy, and the Se/Sp harmonic F-measure."""
    positives = c.tp + c.fn
    negatives = c.tn + c.fp
    if positives == 0 or negatives == 0:
        raise ContractError("metrics need both classes present")
    se = c.tp / positives
    sp = c.tn / negatives
    acc = (c.tn + c.tp) / (positives + negatives)
    f = 0.0 if se + sp == 0 else 2.0 * (se * sp) / (se + sp)
    return Metrics(sensitivity=se, specificity=sp, accuracy=acc, f_measure=f)


def roc_curve(scores, truth) -> RocCurve:
    """ROC points from sweeping thresholds over the descending unique scores.

    At threshold t a sample is predicted positive iff its score >= t, so tied
    scores enter or leave together and produce a single point. The (0, 0)
    corner is prepended; (1, 1) arises at the lowest score.
    """
    scores = np.asarray(scores, dtype=np.float64)
    t = _check_labels(truth)
    if scores.shape != t.shape:
        raise ContractError("scores and labels must have equal length")
    if not np.all(np.isfinite(scores)):
        raise ContractError("scores must be finite")
    n_pos = int(np.sum(t == 1))
    n_neg = int(np.sum(t == -1))
    if n_pos == 0 or n_neg == 0:
        raise ContractError("ROC needs both classes present")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = (t[order] == 1).astype(np.float64)
    cum_tp = np.cumsum(sorted_pos)
    cum_fp = np.cumsum(1.0 - sorted_pos)
    # last index of each run of equal scores = the point where that whole
    # tranche has been predicted positive
    is_run_end = np.ones(sorted_scores.shape[0], dtype=bool)
    is_run_end[:-1] = sorted_scores[:-1] != sorted_scores[1:]
    ends = np.where(is_run_end)[0]
    fpr = np.concatenate(([0.0], cum_fp[ends] / n_neg))
    tpr = np.concatenate(([0.0], cum_tp[ends] / n_pos))
    thresholds = np.concatenate(([np.inf], sorted_scores[ends]))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds)


def auc(roc: RocCurve) -> float:
    """Trapezoidal area under the ROC point list."""
    dx = np.diff(roc.fpr)
    mid_y = (roc.tpr[:-1] + roc.tpr[1:]) / 2.0
    return float(np.sum(dx * mid_y))
