"""Sampler error types."""


class SamplerError(Exception):
    """Base class for sampler errors."""


class ZeroVector(SamplerError):
    """An embedding has zero norm; cosine similarity is undefined."""


class NoMaskableWords(SamplerError):
    """The caption contains no word with a maskable part of speech."""


class ConfigError(SamplerError):
    """Invalid sampling configuration."""
