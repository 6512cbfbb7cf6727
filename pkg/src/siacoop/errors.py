"""Shared exception types."""


class ResourceBoundError(RuntimeError):
    """A configured materialization, enumeration or memory bound was hit."""


class DegenerateChannelError(RuntimeError):
    """A channel realization hit a measure-zero degeneracy; resample."""


class SiaInvariantError(RuntimeError):
    """A post-processing structural invariant failed; this signals an
    implementation or convention error, not bad data."""
