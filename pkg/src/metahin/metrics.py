"""Binary classification metrics and ROC curves from score sweeps."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Metrics:
    tp: int
    tn: int
    fp: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    roc: list[tuple[float, float, float]] = field(default_factory=list)
    # roc rows are (threshold, fpr, tpr); undefined ratios fall back to 0.0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "tn": self.tn,
            "fp": self.fp,
            "fn": self.fn,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def roc_csv(self) -> str:
        lines = ["threshold,fpr,tpr"]
        lines += [f"{t:.17g},{x:.17g},{y:.17g}" for t, x, y in self.roc]
        return "\n".join(lines) + "\n"


def confusion_metrics(tp: int, tn: int, fp: int, fn: int) -> Metrics:
    total = tp + tn + fp + fn
    if total == 0:
        raise ValueError("empty confusion matrix")
    accuracy = (tp + tn) / total
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall
        else 0.0
    )
    return Metrics(tp, tn, fp, fn, accuracy, precision, recall, f1)


def roc_points(
    scores: np.ndarray, truth: np.ndarray
) -> list[tuple[float, float, float]]:
    """(threshold, fpr, tpr) per unique score, descending, classifying
    score >= threshold as positive; endpoints (inf -> (0,0)) and the final
    (min score -> (1,1) when all scored) included."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=int)
    pos = int((truth == 1).sum())
    neg = int((truth == 0).sum())
    points = [(float("inf"), 0.0, 0.0)]
    order = np.argsort(-scores, kind="stable")
    tp = fp = 0
    sorted_scores = scores[order]
    sorted_truth = truth[order]
    i = 0
    n = len(scores)
    while i < n:
        thr = sorted_scores[i]
        while i < n and sorted_scores[i] == thr:
            if sorted_truth[i] == 1:
                tp += 1
            else:
                fp += 1
            i += 1
        points.append(
            (float(thr), fp / neg if neg else 0.0, tp / pos if pos else 0.0)
        )
    return points


def evaluate(
    pred_labels,
    truth,
    scores=None,
) -> Metrics:
    """Confusion counts and derived metrics for aligned label lists; when
    scores are given the ROC sweep is attached."""
    pred_labels = np.asarray(pred_labels, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if len(pred_labels) != len(truth):
        raise ValueError(
            f"length mismatch: {len(pred_labels)} predictions, {len(truth)} truths"
        )
    if len(truth) == 0:
        raise ValueError("nothing to evaluate")
    tp = int(((pred_labels == 1) & (truth == 1)).sum())
    tn = int(((pred_labels == 0) & (truth == 0)).sum())
    fp = int(((pred_labels == 1) & (truth == 0)).sum())
    fn = int(((pred_labels == 0) & (truth == 1)).sum())
    metrics = confusion_metrics(tp, tn, fp, fn)
    if scores is not None:
        scores = np.asarray(scores, dtype=float)
        if len(scores) != len(truth):
            raise ValueError("length mismatch between scores and truth")
        metrics.roc = roc_points(scores, truth)
    return metrics
