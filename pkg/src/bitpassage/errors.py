"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: validation/config problems exit 2,
data and file-format problems exit 3, internal invariant violations exit 4.
"""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(EngineError):
    """An argument violates an operation precondition (bad value, dim mismatch)."""


class ConfigError(EngineError):
    """A configuration invariant is violated; the message names the field."""


class DataError(EngineError):
    """An input file exists but cannot be parsed or is internally inconsistent."""


class FormatError(EngineError):
    """Base class for binary artifact (index / checkpoint) load failures."""


class MagicMismatchError(FormatError):
    """The file does not start with the expected magic bytes."""


class VersionMismatchError(FormatError):
    """The file carries an unsupported format version."""


class TruncatedFileError(FormatError):
    """The file is shorter than its header promises."""


class ChecksumError(FormatError):
    """The payload checksum does not match the stored trailer."""


class TrainingDivergedError(EngineError):
    """Training produced a non-finite loss; carries the step it happened at."""


class InternalError(EngineError):
    """An internal invariant was violated (a bug, not a user error)."""
