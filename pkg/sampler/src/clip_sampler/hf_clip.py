"""CLIP backend with attention-mask sampling.

Masking is implemented as exclusion from self-attention, not token
deletion: masked caption subwords get zeros in the text encoder's attention
mask, and masked image patches are hidden behind an additive key mask fed
through the vision encoder layers.  Sequence lengths and positional
embeddings therefore stay intact.

Needs torch + transformers (and pillow for image files); import them lazily
so the stub path works without the optional dependencies.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import ZeroVector


class HFClipEncoder:
    """Wraps a Hugging Face CLIP model (any `CLIPModel` checkpoint)."""

    def __init__(self, model, tokenizer, image_processor):
        import torch  # noqa: F401  (hard requirement for this backend)

        self._torch = torch
        self.model = model.eval()
        self.tokenizer = tokenizer
        self.image_processor = image_processor
        vision_config = model.config.vision_config
        grid = vision_config.image_size // vision_config.patch_size
        self._patches = grid * grid

    @classmethod
    def from_pretrained(cls, model_id: str) -> "HFClipEncoder":
        try:
            from transformers import AutoImageProcessor, AutoTokenizer, CLIPModel
        except ImportError as exc:  # pragma: no cover - environment dependent
            raise ImportError(
                "the CLIP backend needs the optional dependencies: "
                "pip install 'clip-sampler[clip]'"
            ) from exc
        model = CLIPModel.from_pretrained(model_id)
        tokenizer = AutoTokenizer.from_pretrained(model_id, use_fast=True)
        processor = AutoImageProcessor.from_pretrained(model_id)
        return cls(model, tokenizer, processor)

    # -- text side ------------------------------------------------------

    def _encode_words(self, words: tuple[str, ...]):
        """Token ids with special tokens plus per-word subword spans."""
        encoding = self.tokenizer(
            list(words),
            is_split_into_words=True,
            add_special_tokens=True,
            return_tensors="pt",
        )
        word_ids = encoding.word_ids(0)
        spans: list[list[int]] = [[] for _ in words]
        for position, word in enumerate(word_ids):
            if word is not None:
                spans[word].append(position)
        return encoding["input_ids"], spans

    def subword_spans(self, words: list[str]) -> list[list[int]]:
        _, spans = self._encode_words(tuple(words))
        return spans

    def text_embedding(self, words: list[str], masked_words: frozenset[int]) -> np.ndarray:
        torch = self._torch
        input_ids, spans = self._encode_words(tuple(words))
        attention = torch.ones_like(input_ids)
        for j in masked_words:
            for position in spans[j]:
                attention[0, position] = 0
        with torch.no_grad():
            text_out = self.model.text_model(
                input_ids=input_ids, attention_mask=attention
            )
            embedding = self.model.text_projection(text_out.pooler_output)
        return embedding[0].double().numpy()

    # -- image side -----------------------------------------------------

    def patch_count(self, image_ref: str) -> int:
        return self._patches

    @lru_cache(maxsize=64)
    def _pixel_values(self, image_ref: str):
        from PIL import Image

        with Image.open(image_ref) as img:
            batch = self.image_processor(images=img.convert("RGB"), return_tensors="pt")
        return batch["pixel_values"]

    def image_embedding(self, image_ref: str, masked_patches: frozenset[int]) -> np.ndarray:
        torch = self._torch
        vision = self.model.vision_model
        pixel_values = self._pixel_values(str(image_ref))
        with torch.no_grad():
            hidden = vision.embeddings(pixel_values)
            pre_norm = getattr(vision, "pre_layrnorm", None) or getattr(
                vision, "pre_layernorm"
            )
            hidden = pre_norm(hidden)
            seq = hidden.shape[1]
            mask = None
            if masked_patches:
                # additive key mask; patch p sits at sequence slot p+1 (0 is CLS)
                mask = torch.zeros((1, 1, seq, seq), dtype=hidden.dtype)
                floor = torch.finfo(hidden.dtype).min
                for p in masked_patches:
                    mask[0, 0, :, p + 1] = floor
            encoded = vision.encoder(inputs_embeds=hidden, attention_mask=mask)
            pooled = vision.post_layernorm(encoded.last_hidden_state[:, 0, :])
            embedding = self.model.visual_projection(pooled)
        norm = float(embedding[0].norm())
        if norm == 0.0:
            raise ZeroVector("vision tower produced a zero embedding")
        return embedding[0].double().numpy()
