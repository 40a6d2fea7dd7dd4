"""
Exception hierarchy for the BSRN toolkit.

Every failure raised on purpose derives from BSRNError so the entry point can
turn it into a one-line diagnostic and a nonzero exit status.
"""
from typing import Optional


class BSRNError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(BSRNError, ValueError):
    """Array shapes violate an operation's contract."""


class ConfigError(BSRNError):
    """Invalid model/training configuration or unsupported scale."""


class ImageParseError(BSRNError):
    """Malformed or truncated image file."""

    def __init__(self, message: str, offset: int, path: Optional[str] = None):
        self.offset = offset
        self.path = path
        where = f"{path}: " if path else ""
        super().__init__(f"{where}{message} (at byte offset {offset})")


class SamplingError(BSRNError):
    """A training image cannot provide the requested patch."""

    def __init__(self, message: str, filename: str):
        self.filename = filename
        super().__init__(f"{filename}: {message}")


class MetricError(BSRNError):
    """Inputs too small or malformed for a quality metric."""


class CheckpointError(BSRNError):
    """Corrupt checkpoint or checkpoint/config mismatch."""


class UsageError(BSRNError):
    """Invalid command-line usage detected before any work starts."""
