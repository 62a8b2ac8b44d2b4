"""Exception types shared across the package.

The CLI maps these onto process exit codes; library code raises them
directly.
"""


class SrcountError(Exception):
    """Base class for all package errors."""


class DomainError(SrcountError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class CapacityError(DomainError):
    """More sources requested than the array can resolve."""


class ShapeError(SrcountError, ValueError):
    """Array dimensions are inconsistent with what an operation expects."""


class DataError(SrcountError, ValueError):
    """Dataset contents are incompatible with the consumer (width, labels)."""


class ConfigError(SrcountError, ValueError):
    """A run configuration failed validation; message carries the field path."""


class DivergenceError(SrcountError, RuntimeError):
    """Training produced a non-finite loss."""


class ChecksumError(SrcountError, RuntimeError):
    """A file's payload does not match its recorded checksum."""
