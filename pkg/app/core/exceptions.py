"""Error hierarchy shared by every srres app.

Each error carries the process exit code the management commands report:
1 for usage problems, 2 for data problems, 3 for numeric failures.
"""

USAGE = 1
DATA_ERROR = 2
NUMERIC_FAILURE = 3


class SrresError(Exception):
    """Base class for all engine errors"""
    exit_code = NUMERIC_FAILURE


class InvalidConfig(SrresError):
    """Model or run configuration rejected"""
    exit_code = USAGE


class UnknownMethod(SrresError):
    """Benchmark method name not recognised"""
    exit_code = USAGE


class InvalidShape(SrresError, ValueError):
    """Tensor or image dimensions unusable for the requested operation"""
    exit_code = DATA_ERROR


class DecodeError(SrresError):
    """Image file missing, truncated or in an unsupported format"""
    exit_code = DATA_ERROR


class EmptyDataset(SrresError):
    """Dataset directory or split holds no usable images"""
    exit_code = DATA_ERROR


class CheckpointError(SrresError):
    """Checkpoint file malformed or incompatible"""
    exit_code = DATA_ERROR


class ShapeMismatch(SrresError, ValueError):
    """Operand shapes disagree"""


class InvalidState(SrresError):
    """Cache or optimizer state used out of order"""


class NonFiniteLoss(SrresError):
    """Training loss became NaN or infinite"""
