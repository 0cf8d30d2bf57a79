"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes (see cli.EXIT_CODES), so new
error types should subclass the most specific existing category.
"""


class TouchmapError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(TouchmapError):
    """Tensor/image shape or resolution mismatch."""


class DomainError(TouchmapError, ValueError):
    """Argument outside its mathematical or physical domain."""


class ConfigError(TouchmapError):
    """Invalid or unknown configuration content."""


class MissingInputError(TouchmapError):
    """A required input file or dataset does not exist."""


class TrainingError(TouchmapError):
    """Non-finite loss/gradients or other unrecoverable optimizer state."""


class FormatError(TouchmapError):
    """Corrupt or unsupported binary file content."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class BadDtypeError(FormatError):
    """Unsupported dtype code in a tensor container."""


class TruncatedFileError(FormatError):
    """File ends before the declared payload is complete."""
