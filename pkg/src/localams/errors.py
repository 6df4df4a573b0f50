"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: config problems exit 2,
numeric failures exit 3, and audit failures exit 1.
"""


class DimensionMismatchError(ValueError):
    """Two vectors that must share a length do not."""


class DomainError(ValueError):
    """An input is outside the mathematical domain of an operation."""


class NumericError(ArithmeticError):
    """A computation produced or received non-finite values, or failed to converge."""


class ConfigError(ValueError):
    """A config file or override is missing, malformed, or out of range."""


class AuditError(Exception):
    """A runtime invariant audit failed."""
