"""Exception hierarchy shared across the package."""


class ChurnNetError(Exception):
    """Base class for all package errors."""


class ConfigError(ChurnNetError, ValueError):
    """Invalid or inconsistent configuration."""


class SchemaError(ChurnNetError, ValueError):
    """Input file lacks a required column or has an unreadable header."""


class RangeError(ChurnNetError, ValueError):
    """A record or argument falls outside its admissible range."""


class AlignmentError(ChurnNetError, ValueError):
    """Tables or score vectors are indexed by different customer sets."""


class PretrainingError(ChurnNetError, RuntimeError):
    """A relational classifier cannot be pre-trained on the given labels."""


class FittingError(ChurnNetError, RuntimeError):
    """A model cannot be fitted (e.g. single-class targets)."""


class SamplingError(ChurnNetError, ValueError):
    """Resampling is impossible for the given table."""


class MetricError(ChurnNetError, ValueError):
    """A performance measure is undefined for the given inputs."""


class LeakageError(ChurnNetError, RuntimeError):
    """Feature window overlaps the label window in an out-of-time design."""
