"""Attention-mask sampling: one scored record per image-caption pair.

For each pair the sampler draws ``I`` patch-masked image embeddings and
``T`` word-masked caption embeddings, then scores every combination,
yielding the I base scores (unmasked caption against each masked image) and
the T x I masked-score matrix the downstream calibration toolkit consumes.
Random word masks are topped up round-robin so every maskable word appears
in at least one mask, which the consumer's ingest requires.
"""

from __future__ import annotations

import hashlib
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .config import MASKABLE_POS, SamplerConfig
from .encoders import Encoder, clipscore
from .errors import NoMaskableWords
from .pos import tag_caption

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Pair:
    """One work item: an instance id, an image reference, and a caption."""

    id: str
    image: str
    caption: str


def _pair_rng(seed: int, instance_id: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}\x1f{instance_id}".encode("utf-8")).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest[:8], "big")))


def _mask_count(total: int, percent: float) -> int:
    return min(max(1, round(total * percent / 100.0)), total)


def draw_word_masks(
    maskable: list[int], count: int, percent: float, rng: np.random.Generator
) -> list[frozenset[int]]:
    """Random masks over the maskable words, with guaranteed coverage."""
    per_mask = _mask_count(len(maskable), percent)
    pool = np.array(maskable)
    masks = [
        set(int(x) for x in rng.choice(pool, size=per_mask, replace=False))
        for _ in range(count)
    ]
    covered = set().union(*masks)
    for offset, word in enumerate(sorted(set(maskable) - covered)):
        masks[offset % count].add(word)
    return [frozenset(m) for m in masks]


def draw_patch_masks(
    patches: int, count: int, percent: float, rng: np.random.Generator
) -> list[frozenset[int]]:
    per_mask = min(_mask_count(patches, percent), patches - 1)  # keep one patch visible
    return [
        frozenset(int(x) for x in rng.choice(patches, size=per_mask, replace=False))
        for _ in range(count)
    ]


def sample_scores(pair: Pair, config: SamplerConfig, encoder: Encoder) -> dict:
    """Score one pair into a schema-shaped record.

    Raises NoMaskableWords when POS tagging finds nothing to mask; see
    base_only_record for the flagged fallback the pipeline emits instead.
    """
    tagged = tag_caption(pair.caption)
    words = [surface for _, surface, _ in tagged]
    maskable = [index for index, _, pos in tagged if pos in MASKABLE_POS]
    if not maskable:
        raise NoMaskableWords(f"instance {pair.id!r}: no maskable words in caption")
    rng = _pair_rng(config.seed, pair.id)
    patch_masks = draw_patch_masks(
        encoder.patch_count(pair.image), config.num_image_samples, config.xi_image, rng
    )
    word_masks = draw_word_masks(maskable, config.num_text_samples, config.xi_text, rng)
    image_embeddings = [encoder.image_embedding(pair.image, m) for m in patch_masks]
    caption_embedding = encoder.text_embedding(words, frozenset())
    base_scores = [clipscore(caption_embedding, e) for e in image_embeddings]
    full_score = clipscore(
        caption_embedding, encoder.image_embedding(pair.image, frozenset())
    )
    mask_samples = []
    for word_mask in word_masks:
        masked_embedding = encoder.text_embedding(words, word_mask)
        mask_samples.append(
            {
                "masked": sorted(word_mask),
                "scores": [clipscore(masked_embedding, e) for e in image_embeddings],
            }
        )
    return {
        "id": pair.id,
        "words": [{"index": i, "surface": s, "pos": p} for i, s, p in tagged],
        "base_scores": base_scores,
        "mask_samples": mask_samples,
        "full_score": full_score,
    }


def base_only_record(pair: Pair, config: SamplerConfig, encoder: Encoder) -> dict:
    """Record for a caption with nothing to mask: base scores only."""
    tagged = tag_caption(pair.caption)
    words = [surface for _, surface, _ in tagged]
    rng = _pair_rng(config.seed, pair.id)
    patch_masks = draw_patch_masks(
        encoder.patch_count(pair.image), config.num_image_samples, config.xi_image, rng
    )
    caption_embedding = encoder.text_embedding(words, frozenset())
    base_scores = [
        clipscore(caption_embedding, encoder.image_embedding(pair.image, m))
        for m in patch_masks
    ]
    full_score = clipscore(
        caption_embedding, encoder.image_embedding(pair.image, frozenset())
    )
    return {
        "id": pair.id,
        "words": [{"index": i, "surface": s, "pos": p} for i, s, p in tagged],
        "base_scores": base_scores,
        "mask_samples": [],
        "full_score": full_score,
    }


def score_pairs(pairs: list[Pair], config: SamplerConfig, encoder: Encoder) -> list[dict]:
    """Score every pair; output is sorted by instance id regardless of input
    order, and captions with no maskable words are emitted flagged (empty
    mask_samples) with a warning rather than dropped."""
    records = []
    for pair in pairs:
        try:
            records.append(sample_scores(pair, config, encoder))
        except NoMaskableWords as exc:
            warnings.warn(str(exc), RuntimeWarning, stacklevel=2)
            logger.warning("%s; emitting base scores only", exc)
            records.append(base_only_record(pair, config, encoder))
    records.sort(key=lambda r: r["id"])
    return records
