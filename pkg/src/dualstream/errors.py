"""Exception taxonomy shared across the package."""


class DualStreamError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(DualStreamError, ValueError):
    """Tensor shapes are inconsistent with an operation's contract."""


class EmptySequenceError(ShapeError):
    """A temporal encoder received a sequence with no time steps."""


class ConfigError(DualStreamError, ValueError):
    """A configuration value is outside its allowed range or mode set."""


class ContractError(DualStreamError, ValueError):
    """A call violated an operation's precondition."""


class NumericError(DualStreamError, ArithmeticError):
    """Non-finite values where finite values are required."""


class ValidationError(DualStreamError, ValueError):
    """Data failed invariant validation before serialization."""


class FormatError(DualStreamError, ValueError):
    """Base class for binary container parsing failures."""


class BadMagicError(FormatError):
    """File does not start with the expected magic string."""


class UnsupportedVersionError(FormatError):
    """File declares a format version this build cannot read."""


class TruncatedFileError(FormatError):
    """File ends before the declared payload is complete."""


class ChecksumError(FormatError):
    """Stored checksum does not match the file contents."""


class ManifestError(DualStreamError, ValueError):
    """A dataset manifest is malformed or references bad data."""
