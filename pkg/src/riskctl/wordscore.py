"""Per-word error scores from masked-score matrices, and threshold prediction sets.

Masking a set of words and watching the score move against many masked
images gives one contribution per text sample; averaging the contributions
of every sample containing a word, then squashing through a sigmoid, yields
that word's error score in (0, 1).  A positive raw contribution means the
masked words were hurting the caption's score, i.e. foil evidence.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import LengthMismatch, MissingEvidence
from .scoredata import MaskSample, ScoredInstance


class Mode(str, Enum):
    MULTICLASS = "multiclass"
    MULTILABEL = "multilabel"


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class ErrorScoreVector:
    """Error scores for every maskable word of one instance.

    ``indices`` holds the maskable word indices in increasing order; ``raw``,
    ``scores`` and ``evidence_counts`` align with it.  Non-maskable words
    carry no entry.
    """

    instance_id: str
    indices: np.ndarray
    raw: np.ndarray
    scores: np.ndarray
    evidence_counts: np.ndarray

    def score_of(self, word_index: int) -> float:
        pos = int(np.searchsorted(self.indices, word_index))
        if pos >= len(self.indices) or self.indices[pos] != word_index:
            raise KeyError(f"word index {word_index} has no error score")
        return float(self.scores[pos])

    def as_dict(self) -> dict[int, float]:
        return {int(j): float(s) for j, s in zip(self.indices, self.scores)}

    def argmax_word(self) -> int | None:
        """Word index with the highest error score; ties go to the lowest index."""
        if len(self.indices) == 0:
            return None
        return int(self.indices[int(np.argmax(self.scores))])


@dataclass
class PredictionSet:
    """Words flagged as foils at a given threshold."""

    instance_id: str
    selected: frozenset[int]
    mode: Mode
    lambda_used: float


def sample_contribution(sample: MaskSample, base_scores: np.ndarray) -> float:
    """Mean score change caused by one masked-caption variant.

    Positive values mean the masked words were depressing the caption score.
    """
    base_scores = np.asarray(base_scores, dtype=np.float64)
    if len(sample.scores) != len(base_scores):
        raise LengthMismatch(
            f"sample has {len(sample.scores)} scores but there are "
            f"{len(base_scores)} base scores"
        )
    if len(base_scores) == 0:
        raise LengthMismatch("empty score vectors")
    return float(np.mean(sample.scores - base_scores))


def error_scores(instance: ScoredInstance) -> ErrorScoreVector:
    """Aggregate per-sample contributions into per-word error scores."""
    indices = np.array(sorted(instance.maskable_indices), dtype=np.int64)
    position = {int(j): p for p, j in enumerate(indices)}
    total = np.zeros(len(indices), dtype=np.float64)
    counts = np.zeros(len(indices), dtype=np.int64)
    for sample in instance.mask_samples:
        v = sample_contribution(sample, instance.base_scores)
        for j in sample.masked:
            p = position[j]
            total[p] += v
            counts[p] += 1
    if np.any(counts == 0):
        missing = [int(j) for j, c in zip(indices, counts) if c == 0]
        raise MissingEvidence(
            f"instance {instance.id!r}: maskable words {missing} were never masked"
        )
    raw = total / counts
    return ErrorScoreVector(
        instance_id=instance.id,
        indices=indices,
        raw=raw,
        scores=sigmoid(raw),
        evidence_counts=counts,
    )


def predict(fv: ErrorScoreVector, lam: float, mode: Mode) -> PredictionSet:
    """Threshold the error scores into a prediction set.

    Multilabel keeps every word with score strictly above ``lam``;
    multiclass keeps only the argmax word, and only if it clears ``lam``.
    A word whose score equals ``lam`` exactly is never selected.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    mode = Mode(mode)
    if len(fv.indices) == 0:
        selected: frozenset[int] = frozenset()
    elif mode is Mode.MULTILABEL:
        selected = frozenset(int(j) for j, s in zip(fv.indices, fv.scores) if s > lam)
    else:
        best = int(np.argmax(fv.scores))
        if fv.scores[best] > lam:
            selected = frozenset({int(fv.indices[best])})
        else:
            selected = frozenset()
    return PredictionSet(
        instance_id=fv.instance_id,
        selected=selected,
        mode=mode,
        lambda_used=float(lam),
    )
