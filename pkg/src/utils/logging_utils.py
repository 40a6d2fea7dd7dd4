"""
Logging utilities for the BSRN toolkit.
"""
import logging
import os
import sys
from ..config.settings import settings

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def _handlers():
    handlers = [logging.StreamHandler(sys.stdout)]
    log_file = settings.LOG_FILE
    if not log_file:
        return handlers

    logs_dir = os.path.dirname(log_file)
    if logs_dir:
        os.makedirs(logs_dir, exist_ok=True)
    handlers.insert(0, logging.FileHandler(log_file))
    return handlers


def setup_logger(name="BSRN"):
    """Return a named logger; the first call configures the root logger.

    Every component calls this once at import time, e.g.
    ``logger = setup_logger("TrainingService")``.
    """
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(
            level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
            format=LOG_FORMAT,
            handlers=_handlers(),
        )
    return logging.getLogger(name)


def set_log_level(level: str):
    """Override the configured level (``--log-level`` on the command line)."""
    logging.getLogger().setLevel(getattr(logging, level.upper()))
