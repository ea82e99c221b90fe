"""Encoder backends.

An encoder turns (image, masked patch set) and (caption words, masked word
set) into embeddings.  Word-level masks are translated to subword-token
masks inside the backend, which owns the tokenizer; the mapping is exposed
through ``subword_spans`` / ``masked_subword_positions`` so the exclusion
can be verified exactly.

The stub backend derives embeddings from hashes of the *visible* content,
so masking provably changes the embedding, every run is reproducible, and
no model download is needed.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import ZeroVector

CLIPSCORE_WEIGHT = 2.5


def clipscore(text_embedding: np.ndarray, image_embedding: np.ndarray) -> float:
    """Rescaled, floored cosine similarity in [0, 2.5]."""
    text_embedding = np.asarray(text_embedding, dtype=np.float64)
    image_embedding = np.asarray(image_embedding, dtype=np.float64)
    tn = float(np.linalg.norm(text_embedding))
    vn = float(np.linalg.norm(image_embedding))
    if tn == 0.0 or vn == 0.0:
        raise ZeroVector("cannot score a zero-norm embedding")
    cosine = float(np.dot(text_embedding, image_embedding) / (tn * vn))
    return CLIPSCORE_WEIGHT * max(cosine, 0.0)


class Encoder(Protocol):
    def patch_count(self, image_ref: str) -> int: ...

    def image_embedding(self, image_ref: str, masked_patches: frozenset[int]) -> np.ndarray: ...

    def subword_spans(self, words: list[str]) -> list[list[int]]: ...

    def text_embedding(self, words: list[str], masked_words: frozenset[int]) -> np.ndarray: ...


def masked_subword_positions(encoder, words: list[str], masked_words) -> frozenset[int]:
    """Union of the subword spans of the masked words."""
    spans = encoder.subword_spans(words)
    out: set[int] = set()
    for j in masked_words:
        out.update(spans[j])
    return frozenset(out)


class StubEncoder:
    """Hash-based pseudo-embeddings with the same masking semantics as a
    real encoder: the embedding is a deterministic function of the visible
    tokens or patches only.

    Every embedding mixes a fixed anchor direction with a content hash, so
    unrelated text/image pairs still land at a moderate positive cosine the
    way real CLIP embeddings do, instead of clustering at zero."""

    def __init__(self, dim: int = 64, patches: int = 49, subword_width: int = 4,
                 anchor_weight: float = 0.6):
        self.dim = dim
        self.patches = patches
        self.subword_width = subword_width
        self.anchor_weight = anchor_weight
        self._anchor = np.zeros(dim)
        self._anchor[0] = 1.0
        self._image_keys: dict[str, str] = {}

    # -- shared ---------------------------------------------------------

    def _unit_vector(self, *parts: str) -> np.ndarray:
        digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "big")
        rng = np.random.Generator(np.random.Philox(key=seed))
        vec = rng.standard_normal(self.dim)
        vec /= np.linalg.norm(vec)
        mixed = self.anchor_weight * self._anchor + vec
        return mixed / np.linalg.norm(mixed)

    # -- image side -----------------------------------------------------

    def patch_count(self, image_ref: str) -> int:
        return self.patches

    def _image_key(self, image_ref: str) -> str:
        """Content hash when the ref is a readable file, so the embedding
        does not depend on where the file happens to live."""
        if image_ref not in self._image_keys:
            path = Path(str(image_ref))
            if path.is_file():
                self._image_keys[image_ref] = hashlib.sha256(path.read_bytes()).hexdigest()
            else:
                self._image_keys[image_ref] = str(image_ref)
        return self._image_keys[image_ref]

    def image_embedding(self, image_ref: str, masked_patches: frozenset[int]) -> np.ndarray:
        visible = [str(p) for p in range(self.patches) if p not in masked_patches]
        return self._unit_vector("image", self._image_key(image_ref), *visible)

    # -- text side ------------------------------------------------------

    def subword_spans(self, words: list[str]) -> list[list[int]]:
        spans, position = [], 0
        for word in words:
            width = max(1, (len(word) + self.subword_width - 1) // self.subword_width)
            spans.append(list(range(position, position + width)))
            position += width
        return spans

    def text_embedding(self, words: list[str], masked_words: frozenset[int]) -> np.ndarray:
        spans = self.subword_spans(words)
        hidden = {p for j in masked_words for p in spans[j]}
        pieces = []
        for word, span in zip(words, spans):
            for offset, position in enumerate(span):
                if position not in hidden:
                    pieces.append(f"{position}:{word}[{offset}]")
        return self._unit_vector("text", *pieces)


def load_encoder(model: str) -> Encoder:
    """Resolve a model name to a backend.

    ``stub`` gives the deterministic hash encoder; anything else is treated
    as a Hugging Face CLIP checkpoint id and needs torch + transformers.
    """
    if model == "stub":
        return StubEncoder()
    from .hf_clip import HFClipEncoder

    return HFClipEncoder.from_pretrained(model)
