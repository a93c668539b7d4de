"""Weighted precision/recall/F1 over confusion matrices.

Weighting is by gold support, which makes weighted recall coincide with
accuracy (trace over total) exactly; that identity is asserted in tests
rather than assumed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import taxonomy


@dataclass
class MetricsReport:
    labels: list[str]
    confusion: np.ndarray          # rows gold, columns predicted
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    accuracy: float

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "weighted_f1": self.weighted_f1,
            "accuracy": self.accuracy,
            "per_class": [
                {"label": l, "precision": float(p), "recall": float(r),
                 "f1": float(f), "support": int(s)}
                for l, p, r, f, s in zip(self.labels, self.precision,
                                         self.recall, self.f1, self.support)
            ],
            "confusion": self.confusion.tolist(),
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fp:
            json.dump(self.to_dict(), fp, indent=2)

    def confusion_csv(self) -> str:
        lines = ["gold\\pred," + ",".join(self.labels)]
        for label, row in zip(self.labels, self.confusion):
            lines.append(label + "," + ",".join(str(int(x)) for x in row))
        return "\n".join(lines) + "\n"


def weighted_prf(confusion: np.ndarray, labels: list[str] | None = None) -> MetricsReport:
    """Per-class and support-weighted metrics with a zero-division -> 0
    convention for absent classes."""
    cm = np.asarray(confusion)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.size == 0:
        raise ValueError(f"confusion matrix must be square and non-empty, got {cm.shape}")
    if (cm < 0).any():
        raise ValueError("confusion matrix entries must be non-negative")
    n = cm.shape[0]
    if labels is None:
        labels = [str(i) for i in range(n)]
    if len(labels) != n:
        raise ValueError("label count does not match matrix size")

    cm = cm.astype(np.float64)
    tp = np.diag(cm)
    gold = cm.sum(axis=1)
    pred = cm.sum(axis=0)
    total = cm.sum()
    if total == 0:
        raise ValueError("confusion matrix is all zeros")

    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(pred > 0, tp / pred, 0.0)
        recall = np.where(gold > 0, tp / gold, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2 * precision * recall / pr, 0.0)

    weights = gold / total
    return MetricsReport(
        labels=list(labels),
        confusion=np.asarray(confusion).astype(np.int64),
        precision=precision,
        recall=recall,
        f1=f1,
        support=gold.astype(np.int64),
        weighted_precision=float((weights * precision).sum()),
        weighted_recall=float((weights * recall).sum()),
        weighted_f1=float((weights * f1).sum()),
        accuracy=float(tp.sum() / total),
    )


def confusion_from_predictions(gold: np.ndarray, pred: np.ndarray, n_labels: int) -> np.ndarray:
    cm = np.zeros((n_labels, n_labels), dtype=np.int64)
    for g, p in zip(gold, pred):
        cm[int(g), int(p)] += 1
    return cm


def rollup_to_category(report: MetricsReport) -> MetricsReport:
    """Collapse a 24-type report into the 9 categories and recompute."""
    if len(report.labels) != taxonomy.NUM_TYPES:
        raise ValueError("rollup expects a 24-type report")
    mapping = [taxonomy.category_id_of_type(taxonomy.type_id(l)) for l in report.labels]
    cm = np.zeros((taxonomy.NUM_CATEGORIES, taxonomy.NUM_CATEGORIES), dtype=np.int64)
    for i, ci in enumerate(mapping):
        for j, cj in enumerate(mapping):
            cm[ci, cj] += report.confusion[i, j]
    return weighted_prf(cm, list(taxonomy.CATEGORY_NAMES))
