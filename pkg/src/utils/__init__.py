"""
Utils module for the BSRN toolkit.
"""
from .logging_utils import set_log_level, setup_logger
from .errors import (
    BSRNError,
    ShapeError,
    ConfigError,
    ImageParseError,
    SamplingError,
    MetricError,
    CheckpointError,
    UsageError,
)

__all__ = [
    'setup_logger',
    'set_log_level',
    'BSRNError',
    'ShapeError',
    'ConfigError',
    'ImageParseError',
    'SamplingError',
    'MetricError',
    'CheckpointError',
    'UsageError',
]
