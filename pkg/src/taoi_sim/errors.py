"""Shared exception types."""


class SimError(Exception):
    """Base class for simulator errors."""


class ConfigError(SimError):
    """Bad or inconsistent configuration."""


class TraceError(SimError):
    """Malformed trajectory trace file."""


class UndefinedValueError(SimError):
    """A metric was requested where it is mathematically undefined
    (empty window, no neighbors, no reception history)."""
