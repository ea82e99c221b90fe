"""Canonical data model and file schema for CLIPScore sample distributions.

One instance is an image-caption pair scored many times under input masking:
``base_scores[i]`` is the full caption against the i-th masked image, and
``mask_samples[t].scores[i]`` is the t-th masked caption against the i-th
masked image, giving an I x T score matrix per instance.

File schema is JSON Lines, UTF-8, one instance per line::

    {"id": str,
     "words": [{"index": int, "surface": str, "pos": str}, ...],
     "base_scores": [float, ...],
     "mask_samples": [{"masked": [int, ...], "scores": [float, ...]}, ...],
     "foil_labels": [int, ...],      # optional
     "human_score": float,           # optional
     "full_score": float}            # optional

Canonical form (what :func:`write_dataset` emits) uses sorted keys, no
whitespace, sorted ``masked`` lists, and floats printed with 9 significant
digits, so a load/write round trip is byte-stable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CoverageError,
    DegenerateDistribution,
    DuplicateIdError,
    RangeError,
    SchemaError,
)

SCORE_MIN = 0.0
SCORE_MAX = 2.5

#: Parts of speech eligible for masking.
MASKABLE_POS = frozenset({"NOUN", "PROPN", "NUM", "VERB", "ADJ", "ADV"})


class Split(str, Enum):
    CALIBRATION = "calibration"
    TEST = "test"


class DatasetKind(str, Enum):
    DETECTION = "detection"
    INTERVAL = "interval"


@dataclass(frozen=True)
class WordToken:
    """One caption word with its position and part-of-speech tag."""

    index: int
    surface: str
    pos: str

    @property
    def maskable(self) -> bool:
        return self.pos in MASKABLE_POS


@dataclass
class MaskSample:
    """Scores of one masked-caption variant against every masked image."""

    masked: frozenset[int]
    scores: np.ndarray

    def __post_init__(self):
        self.masked = frozenset(int(i) for i in self.masked)
        self.scores = np.asarray(self.scores, dtype=np.float64)


@dataclass
class ScoredInstance:
    """One image-caption pair with its full score distribution and labels."""

    id: str
    words: list[WordToken]
    base_scores: np.ndarray
    mask_samples: list[MaskSample]
    foil_labels: frozenset[int] | None = None
    human_score: float | None = None
    full_score: float | None = None

    def __post_init__(self):
        self.base_scores = np.asarray(self.base_scores, dtype=np.float64)
        if self.foil_labels is not None:
            self.foil_labels = frozenset(int(i) for i in self.foil_labels)

    @property
    def num_images(self) -> int:
        return len(self.base_scores)

    @property
    def num_text_samples(self) -> int:
        return len(self.mask_samples)

    @property
    def maskable_indices(self) -> frozenset[int]:
        return frozenset(w.index for w in self.words if w.maskable)

    def score_matrix(self) -> np.ndarray:
        """All masked-caption scores as a T x I array."""
        if not self.mask_samples:
            return np.empty((0, self.num_images), dtype=np.float64)
        return np.stack([s.scores for s in self.mask_samples])

    def validate(self) -> None:
        """Check every typed invariant; raise a descriptive error otherwise."""
        indices = sorted(w.index for w in self.words)
        if indices != list(range(len(self.words))):
            raise SchemaError(
                f"instance {self.id!r}: word indices must be unique and "
                f"contiguous from 0, got {indices}"
            )
        _check_score_range(self.id, "base_scores", self.base_scores)
        word_count = len(self.words)
        maskable = self.maskable_indices
        n_images = self.num_images
        if n_images < 1:
            raise SchemaError(f"instance {self.id!r}: base_scores is empty")
        seen: set[int] = set()
        for t, sample in enumerate(self.mask_samples):
            if not sample.masked:
                raise SchemaError(
                    f"instance {self.id!r}: mask sample {t} masks no words"
                )
            bad = [j for j in sample.masked if j < 0 or j >= word_count]
            if bad:
                raise SchemaError(
                    f"instance {self.id!r}: mask sample {t} refers to "
                    f"out-of-range word indices {sorted(bad)}"
                )
            not_maskable = sorted(sample.masked - maskable)
            if not_maskable:
                raise SchemaError(
                    f"instance {self.id!r}: mask sample {t} masks "
                    f"non-maskable word indices {not_maskable}"
                )
            if len(sample.scores) != n_images:
                raise SchemaError(
                    f"instance {self.id!r}: mask sample {t} has "
                    f"{len(sample.scores)} scores, expected {n_images}"
                )
            _check_score_range(self.id, f"mask sample {t}", sample.scores)
            seen.update(sample.masked)
        uncovered = sorted(maskable - seen)
        if uncovered:
            raise CoverageError(
                f"instance {self.id!r}: maskable word indices {uncovered} "
                f"appear in no mask sample"
            )
        if self.foil_labels is not None:
            stray = sorted(self.foil_labels - maskable)
            if stray:
                raise SchemaError(
                    f"instance {self.id!r}: foil_labels {stray} are not "
                    f"maskable word indices"
                )
        for name in ("human_score", "full_score"):
            value = getattr(self, name)
            if value is not None and not math.isfinite(float(value)):
                raise SchemaError(f"instance {self.id!r}: {name} is not finite")


def _check_score_range(instance_id: str, where: str, scores: np.ndarray) -> None:
    arr = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise RangeError(f"instance {instance_id!r}: non-finite score in {where}")
    if arr.size and (arr.min() < SCORE_MIN or arr.max() > SCORE_MAX):
        bad = int(np.argmax((arr < SCORE_MIN) | (arr > SCORE_MAX)))
        raise RangeError(
            f"instance {instance_id!r}: {where} entry {bad} is "
            f"{arr[bad]!r}, outside [{SCORE_MIN}, {SCORE_MAX}]"
        )


@dataclass
class Dataset:
    """An immutable collection of validated instances."""

    instances: tuple[ScoredInstance, ...]
    split: Split = Split.CALIBRATION

    def __post_init__(self):
        self.instances = tuple(self.instances)
        if isinstance(self.split, str):
            self.split = Split(self.split)

    @property
    def n(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def __len__(self) -> int:
        return len(self.instances)


def load_dataset(
    path: str | Path,
    expected_kind: DatasetKind | str = DatasetKind.DETECTION,
    split: Split | str = Split.CALIBRATION,
) -> Dataset:
    """Load and fully validate a JSON Lines score file.

    ``expected_kind`` records what the caller intends to do with the data;
    optional fields (foil labels, human scores) are permitted to be absent
    either way, and the operations that need them raise MissingLabelError
    at use time.

    Raises SchemaError, RangeError, CoverageError or DuplicateIdError on the
    first offending instance; no partially loaded dataset is ever returned.
    """
    DatasetKind(expected_kind)  # validate the hint itself
    path = Path(path)
    instances: list[ScoredInstance] = []
    ids: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            instance = _instance_from_record(record, f"{path}:{lineno}")
            if instance.id in ids:
                raise DuplicateIdError(
                    f"{path}:{lineno}: duplicate instance id {instance.id!r}"
                )
            ids.add(instance.id)
            instance.validate()
            instances.append(instance)
    if not instances:
        raise SchemaError(f"{path}: empty dataset")
    return Dataset(tuple(instances), Split(split))


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise SchemaError(f"{where}: missing required field {key!r}")
    return record[key]


def _float_list(raw, where: str, what: str) -> np.ndarray:
    if not isinstance(raw, list) or not all(isinstance(x, (int, float)) for x in raw):
        raise SchemaError(f"{where}: {what} must be a list of numbers")
    return np.asarray(raw, dtype=np.float64)


def _instance_from_record(record, where: str) -> ScoredInstance:
    if not isinstance(record, dict):
        raise SchemaError(f"{where}: each line must be a JSON object")
    instance_id = _require(record, "id", where)
    if not isinstance(instance_id, str) or not instance_id:
        raise SchemaError(f"{where}: id must be a non-empty string")
    raw_words = _require(record, "words", where)
    if not isinstance(raw_words, list) or not raw_words:
        raise SchemaError(f"{where}: words must be a non-empty list")
    words = []
    for entry in raw_words:
        if not isinstance(entry, dict):
            raise SchemaError(f"{where}: each word must be an object")
        try:
            words.append(
                WordToken(
                    index=int(entry["index"]),
                    surface=str(entry["surface"]),
                    pos=str(entry["pos"]),
                )
            )
        except KeyError as exc:
            raise SchemaError(f"{where}: word entry missing field {exc}") from exc
    base_scores = _float_list(_require(record, "base_scores", where), where, "base_scores")
    raw_samples = _require(record, "mask_samples", where)
    if not isinstance(raw_samples, list):
        raise SchemaError(f"{where}: mask_samples must be a list")
    samples = []
    for t, entry in enumerate(raw_samples):
        if not isinstance(entry, dict) or "masked" not in entry or "scores" not in entry:
            raise SchemaError(
                f"{where}: mask sample {t} must be an object with 'masked' and 'scores'"
            )
        masked = entry["masked"]
        if not isinstance(masked, list) or not all(isinstance(i, int) for i in masked):
            raise SchemaError(f"{where}: mask sample {t} 'masked' must be a list of ints")
        samples.append(
            MaskSample(
                masked=frozenset(masked),
                scores=_float_list(entry["scores"], where, f"mask sample {t} scores"),
            )
        )
    foil_labels = record.get("foil_labels")
    if foil_labels is not None:
        if not isinstance(foil_labels, list) or not all(isinstance(i, int) for i in foil_labels):
            raise SchemaError(f"{where}: foil_labels must be a list of ints")
        foil_labels = frozenset(foil_labels)
    for name in ("human_score", "full_score"):
        value = record.get(name)
        if value is not None and not isinstance(value, (int, float)):
            raise SchemaError(f"{where}: {name} must be a number")
    return ScoredInstance(
        id=instance_id,
        words=words,
        base_scores=base_scores,
        mask_samples=samples,
        foil_labels=foil_labels,
        human_score=None if record.get("human_score") is None else float(record["human_score"]),
        full_score=None if record.get("full_score") is None else float(record["full_score"]),
    )


def summarize_distribution(instance: ScoredInstance) -> tuple[float, float, np.ndarray]:
    """Mean, population standard deviation, and the flattened I*T scores.

    The I*T values are the entire generated distribution rather than a
    subsample, so the standard deviation uses the population divisor N.
    """
    flat = instance.score_matrix().reshape(-1)
    if flat.size < 2:
        raise DegenerateDistribution(
            f"instance {instance.id!r}: needs at least 2 scores, has {flat.size}"
        )
    mu = float(np.mean(flat))
    sigma = float(np.std(flat))
    return mu, sigma, flat


def format_float(value: float) -> str:
    """Canonical 9-significant-digit rendering used by the file format."""
    return format(float(value), ".9g")


def canonical_line(instance: ScoredInstance) -> str:
    """Render one instance in canonical JSON (sorted keys, fixed floats)."""
    parts = [f'"base_scores":[{",".join(format_float(x) for x in instance.base_scores)}]']
    if instance.foil_labels is not None:
        labels = ",".join(str(i) for i in sorted(instance.foil_labels))
        parts.append(f'"foil_labels":[{labels}]')
    if instance.full_score is not None:
        parts.append(f'"full_score":{format_float(instance.full_score)}')
    if instance.human_score is not None:
        parts.append(f'"human_score":{format_float(instance.human_score)}')
    parts.append(f'"id":{json.dumps(instance.id, ensure_ascii=False)}')
    samples = []
    for sample in instance.mask_samples:
        masked = ",".join(str(i) for i in sorted(sample.masked))
        scores = ",".join(format_float(x) for x in sample.scores)
        samples.append(f'{{"masked":[{masked}],"scores":[{scores}]}}')
    parts.append(f'"mask_samples":[{",".join(samples)}]')
    words = []
    for word in sorted(instance.words, key=lambda w: w.index):
        words.append(
            f'{{"index":{word.index},"pos":{json.dumps(word.pos, ensure_ascii=False)},'
            f'"surface":{json.dumps(word.surface, ensure_ascii=False)}}}'
        )
    parts.append(f'"words":[{",".join(words)}]')
    return "{" + ",".join(parts) + "}"


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset in canonical form; load -> write round trips are byte-stable."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for instance in dataset.instances:
            handle.write(canonical_line(instance))
            handle.write("\n")
