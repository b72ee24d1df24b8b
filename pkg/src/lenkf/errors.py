"""Exception types shared across the package.

Everything derives from LenkfError so callers can catch broadly; the
subclasses exist because tests and the CLI distinguish configuration
mistakes from numerical failures.
"""


class LenkfError(Exception):
    """Base class for errors raised by this package."""


class NotSPD(LenkfError):
    """A matrix required to be symmetric positive definite is not."""


class DimensionMismatch(LenkfError):
    """Array shapes are incompatible for the requested operation."""


class DimensionTooSmall(LenkfError):
    """State dimension below the minimum the operation supports."""


class EmptyInput(LenkfError):
    """An operation received an empty array where data is required."""


class LengthMismatch(LenkfError):
    """Two samples that must have equal length do not."""


class IndivisibleBatch(LenkfError):
    """Mini-batch size does not divide the number of observations."""


class EnsembleTooSmall(LenkfError):
    """Fewer ensemble members than the algorithm requires."""


class EmptyPool(LenkfError):
    """Resampling requested from an empty particle pool."""


class TooFewSamples(LenkfError):
    """Not enough samples to form the requested summary."""


class BurnInTooLarge(LenkfError):
    """Burn-in consumes every retained sample."""


class StreamExhausted(LenkfError):
    """A random-stream path component exceeded its addressable range."""


class ConfigInvalid(LenkfError):
    """An experiment configuration failed validation."""
