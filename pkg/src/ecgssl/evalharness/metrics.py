"""Accuracy, F1 and Mann-Whitney AUC, plus fold aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from ecgssl.errors import ShapeError

METRIC_NAMES = ("accuracy", "f1", "auc")


def accuracy(y_true, y_pred):
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    return float(np.mean(y_true == y_pred))


def f1_score(y_true, y_pred):
    """2PR/(P+R) for the positive class; 0 when precision and recall are both 0."""
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    return 0.0 if tp == 0 else 2.0 * tp / (2.0 * tp + fp + fn)


def roc_auc(y_true, y_score):
    """Probability a random positive outranks a random negative (ties count
    half), via the rank-sum form of the Mann-Whitney statistic.  ``None``
    when only one class is present."""
    y_true = np.asarray(y_true)
    y_score = np.asarray(y_score, dtype=np.float64)
    pos = y_true == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(y_score)  # average ranks on ties
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def compute_metrics(y_true, y_pred, y_score):
    if not len(y_true) == len(y_pred) == len(y_score):
        raise ShapeError(
            f"metric inputs differ in length: {len(y_true)}, {len(y_pred)}, {len(y_score)}"
        )
    return {
        "accuracy": accuracy(y_true, y_pred),
        "f1": f1_score(y_true, y_pred),
        "auc": roc_auc(y_true, y_score),
    }


@dataclass
class MetricsReport:
    folds: list  # per-fold {"accuracy", "f1", "auc"}
    meta: dict = field(default_factory=dict)

    def values(self, name):
        return [f[name] for f in self.folds if f[name] is not None]

    def mean(self, name):
        v = self.values(name)
        return float(np.mean(v)) if v else None

    def std(self, name):
        v = self.values(name)
        return float(np.std(v, ddof=1)) if len(v) > 1 else (0.0 if v else None)

    def aggregate(self):
        return {n: {"mean": self.mean(n), "std": self.std(n)} for n in METRIC_NAMES}

    def to_dict(self):
        return {"folds": self.folds, "aggregate": self.aggregate(), "meta": self.meta}

    def summary_lines(self):
        lines = []
        for n in METRIC_NAMES:
            m, s = self.mean(n), self.std(n)
            text = "n/a" if m is None else f"{m:.3f} ± {s:.3f}"
            lines.append(f"{n:>9}: {text}")
        return lines


def fmt(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.6f}"
