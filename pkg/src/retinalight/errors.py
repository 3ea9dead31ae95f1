"""Exception types shared across the package.

Each family maps onto one of the CLI's stable exit codes: usage problems
exit 1, I/O and data problems exit 2, numeric aborts exit 3, failed
self-checks exit 4.
"""


class RetinaLightError(Exception):
    """Base class for every error raised by this package."""


class UsageError(RetinaLightError):
    """Invalid command line or option combination."""


class ImageDecodeError(RetinaLightError):
    """Byte stream is not a decodable PNG."""


class UnsupportedFormatError(RetinaLightError):
    """PNG feature outside the supported 8/16-bit gray/truecolor subset."""


class InvalidDimensionError(RetinaLightError, ValueError):
    """Image or array dimensions violate a contract (e.g. zero-sized)."""


class InvalidChannelError(RetinaLightError, ValueError):
    """Wrong channel count for the requested operation."""


class InvalidParameterError(RetinaLightError, ValueError):
    """Scalar parameter out of range (sigma <= 0, even kernel size, ...)."""


class InvalidInputError(RetinaLightError, ValueError):
    """Mismatched shapes or otherwise inconsistent operands."""


class NumericError(RetinaLightError):
    """Division by zero, NaN/Inf encountered, or a numeric abort in training."""


class CheckpointFormatError(RetinaLightError):
    """Checkpoint JSON is malformed, has wrong shapes, or non-finite values."""


class DatasetLayoutError(RetinaLightError):
    """Expected dataset directory structure is missing."""


class DataPairingError(RetinaLightError):
    """Low/high image files could not be matched one-to-one."""


class DataError(RetinaLightError):
    """A concrete data item is unusable (size mismatch, empty set, ...)."""


class CheckFailureError(RetinaLightError):
    """A self-check (e.g. the gradient check) exceeded its threshold."""
