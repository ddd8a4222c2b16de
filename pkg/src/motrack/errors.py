"""Shared exception types."""


class ConfigError(Exception):
    """A configuration value is missing, malformed, or out of range."""


class ContractViolation(RuntimeError):
    """An internal invariant was broken; indicates a bug, not bad input."""
