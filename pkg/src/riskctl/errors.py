"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


# -- data model / ingest ----------------------------------------------------

class SchemaError(ToolkitError):
    """A record is missing a field, has the wrong type, or breaks a typed invariant."""


class RangeError(ToolkitError):
    """A score falls outside the admissible [0, 2.5] interval."""


class CoverageError(ToolkitError):
    """A maskable word never appears in any mask sample."""


class DuplicateIdError(ToolkitError):
    """Two instances in one file share an id."""


class MissingLabelError(ToolkitError):
    """An operation needs foil labels or human scores that the data does not carry."""


class DegenerateDistribution(ToolkitError):
    """Fewer than two score samples; mean/std are not meaningful."""


# -- numerics ---------------------------------------------------------------

class DomainError(ToolkitError):
    """Argument outside the mathematical domain of a bound."""


class NumericalError(ToolkitError):
    """A computation lost all precision (e.g. truncation mass underflowed)."""


class ZeroVariance(ToolkitError):
    """A correlation is undefined because one input vector is constant."""


class DegenerateScale(ToolkitError):
    """Reference ratings carry fewer than two distinct values."""


# -- scoring / prediction ---------------------------------------------------

class LengthMismatch(ToolkitError):
    """Two vectors that must align have different lengths."""


class MissingEvidence(ToolkitError):
    """A maskable word has no mask-sample evidence (ingest should prevent this)."""


class LabelError(ToolkitError):
    """Labels refer to words outside the maskable set."""


class AlignmentError(ToolkitError):
    """Predictions and labels cannot be joined by instance id."""


class NoPositives(ToolkitError):
    """Average precision needs at least one positive label."""


class NoFoilInstances(ToolkitError):
    """Location accuracy needs at least one instance with a labelled foil."""


# -- calibration ------------------------------------------------------------

class NoFeasibleLambda(ToolkitError):
    """No threshold keeps the upper confidence bound below the tolerance."""


class EmptyAcceptedSet(ToolkitError):
    """Every hypothesis survived the corrected test; no lambda is certified."""


class ConfigError(ToolkitError):
    """A synthetic-data or run configuration is invalid."""
