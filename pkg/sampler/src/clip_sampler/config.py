"""Sampling configuration."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError

#: Parts of speech eligible for masking; shared contract with the consumer.
MASKABLE_POS = frozenset({"NOUN", "PROPN", "NUM", "VERB", "ADJ", "ADV"})


@dataclass(frozen=True)
class SamplerConfig:
    """How many masked variants to draw and how aggressively to mask.

    ``xi_image`` and ``xi_text`` are percentages of image patches and of
    maskable caption words hidden per sample.  Defaults are engineering
    choices, not reference values.
    """

    model: str = "stub"
    num_image_samples: int = 20
    num_text_samples: int = 20
    xi_image: float = 25.0
    xi_text: float = 25.0
    seed: int = 0

    def __post_init__(self):
        if self.num_image_samples < 1 or self.num_text_samples < 1:
            raise ConfigError("sample counts must be at least 1")
        if not 0.0 < self.xi_image < 100.0:
            raise ConfigError("xi_image must lie strictly between 0 and 100")
        if not 0.0 < self.xi_text < 100.0:
            raise ConfigError("xi_text must lie strictly between 0 and 100")
