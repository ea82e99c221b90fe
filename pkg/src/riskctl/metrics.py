"""Evaluation metrics: precision/recall/F1, average precision, location
accuracy, Kendall tau-c and Pearson correlation."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    DegenerateScale,
    NoFoilInstances,
    NoPositives,
    ZeroVariance,
)
from .wordscore import ErrorScoreVector, PredictionSet


class LAVariant(str, Enum):
    TOP1 = "top1"
    SET = "set"


@dataclass
class MetricReport:
    """Named metric values plus the raw counts behind the rates."""

    values: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    n_instances: int = 0

    def as_dict(self) -> dict:
        return {
            "values": {k: float(v) for k, v in sorted(self.values.items())},
            "counts": {k: int(v) for k, v in sorted(self.counts.items())},
            "n_instances": self.n_instances,
        }

    def format_table(self) -> str:
        width = max((len(k) for k in self.values), default=6)
        lines = [f"{'metric':<{width}}  value"]
        for key in sorted(self.values):
            lines.append(f"{key:<{width}}  {self.values[key]:.6f}")
        return "\n".join(lines)


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return precision, recall, f1


def word_prf(
    preds: Sequence[PredictionSet],
    labels: Mapping[str, frozenset[int] | set[int]],
) -> tuple[float, float, float]:
    """Micro-averaged word-level precision, recall and F1."""
    tp = fp = fn = 0
    for pred in preds:
        if pred.instance_id not in labels:
            raise AlignmentError(f"no labels for instance {pred.instance_id!r}")
        truth = set(labels[pred.instance_id])
        tp += len(pred.selected & truth)
        fp += len(pred.selected - truth)
        fn += len(truth - pred.selected)
    return _prf(tp, fp, fn)


def instance_prf(
    preds: Sequence[PredictionSet],
    labels: Mapping[str, frozenset[int] | set[int]],
) -> tuple[float, float, float]:
    """Caption-level precision, recall and F1.

    A caption counts as flagged wrong exactly when its prediction set is
    non-empty, and as truly wrong when it carries at least one foil label.
    """
    tp = fp = fn = 0
    for pred in preds:
        if pred.instance_id not in labels:
            raise AlignmentError(f"no labels for instance {pred.instance_id!r}")
        flagged = len(pred.selected) > 0
        wrong = len(labels[pred.instance_id]) > 0
        if flagged and wrong:
            tp += 1
        elif flagged:
            fp += 1
        elif wrong:
            fn += 1
    return _prf(tp, fp, fn)


def average_precision(scores, labels) -> float:
    """AP = sum over thresholds of (recall step) * precision.

    Thresholds run over the distinct scores in descending order and tied
    scores enter as one group, with precision measured after the group.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise AlignmentError("scores and labels must have equal length")
    n_pos = int(np.sum(labels != 0))
    if n_pos == 0:
        raise NoPositives("average precision needs at least one positive label")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = (labels[order] != 0).astype(np.int64)
    ap = 0.0
    prev_recall = 0.0
    tp = fp = 0
    i = 0
    n = len(sorted_scores)
    while i < n:
        j = i
        while j < n and sorted_scores[j] == sorted_scores[i]:
            j += 1
        tp += int(np.sum(sorted_labels[i:j]))
        fp += (j - i) - int(np.sum(sorted_labels[i:j]))
        precision = tp / (tp + fp)
        recall = tp / n_pos
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j
    return float(ap)


def location_accuracy(
    preds: Sequence[PredictionSet],
    fvs: Sequence[ErrorScoreVector],
    labels: Mapping[str, frozenset[int] | set[int]],
    variant: LAVariant = LAVariant.TOP1,
) -> float:
    """Fraction of foil-bearing instances whose foil is found.

    ``top1`` scores a hit when the highest-scoring word is a labelled foil;
    ``set`` scores a hit when the prediction set intersects the labels.
    """
    variant = LAVariant(variant)
    by_id = {fv.instance_id: fv for fv in fvs}
    hits = 0
    total = 0
    for pred in preds:
        if pred.instance_id not in labels or pred.instance_id not in by_id:
            raise AlignmentError(f"no labels or scores for {pred.instance_id!r}")
        truth = set(labels[pred.instance_id])
        if not truth:
            continue
        total += 1
        if variant is LAVariant.TOP1:
            if by_id[pred.instance_id].argmax_word() in truth:
                hits += 1
        else:
            if pred.selected & truth:
                hits += 1
    if total == 0:
        raise NoFoilInstances("no instance carries a foil label")
    return hits / total


def kendall_tau_c(preds, refs) -> float:
    """Kendall tau-c between predicted scores and reference ratings.

    The scale correction uses the number of distinct reference values, so
    the statistic is exact on rating scales coarser than the predictions.
    """
    preds = np.asarray(preds, dtype=np.float64)
    refs = np.asarray(refs, dtype=np.float64)
    if preds.shape != refs.shape or preds.ndim != 1:
        raise AlignmentError("inputs must be equal-length vectors")
    n = len(preds)
    if n < 2:
        raise DegenerateScale("need at least two observations")
    m = len(np.unique(refs))
    if m < 2:
        raise DegenerateScale("reference ratings are constant")
    sign_p = np.sign(preds[:, None] - preds[None, :])
    sign_r = np.sign(refs[:, None] - refs[None, :])
    prod = sign_p * sign_r
    upper = np.triu_indices(n, k=1)
    concordant = int(np.sum(prod[upper] > 0))
    discordant = int(np.sum(prod[upper] < 0))
    n0 = n * (n - 1) // 2
    # single fused ratio keeps integer arithmetic exact until one division
    return ((concordant - discordant) * (n - 1) * m) / (n0 * n * (m - 1))


def pearson(x, y) -> float:
    """Product-moment correlation; raises ZeroVariance on constant input."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise AlignmentError("inputs must be equal-length vectors")
    if len(x) < 2:
        raise ZeroVariance("need at least two observations")
    dx = x - np.mean(x)
    dy = y - np.mean(y)
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ZeroVariance("correlation undefined for a constant vector")
    return float(np.sum(dx * dy) / (sx * sy))
