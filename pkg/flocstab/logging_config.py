"""
Logging for flocstab

Every record goes to standard error; standard output carries only the
JSON documents the command-line interface prints. The level comes from
flocstab.config (FLOCSTAB_LOG_LEVEL) and the --log-level flag.
"""

import logging
import sys
from typing import Optional

LOGGER_NAME = 'flocstab'
DEFAULT_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class StderrHandler(logging.StreamHandler):
    """Stream handler bound to whatever sys.stderr is when a record is emitted"""

    def __init__(self, level: int = logging.NOTSET):
        logging.Handler.__init__(self, level)

    @property
    def stream(self):
        return sys.stderr


def _level(level: str) -> int:
    value = logging.getLevelName(level.upper())
    if not isinstance(value, int):
        raise ValueError(f"unknown log level: {level!r}")
    return value


def setup_logging(level: str = 'INFO', format_string: Optional[str] = None) -> logging.Logger:
    """
    Attach the stderr handler to the flocstab logger

    Calling it again replaces the format and level but never adds a
    second handler.
    """
    logger = logging.getLogger(LOGGER_NAME)
    handler = next((h for h in logger.handlers if isinstance(h, StderrHandler)), None)
    if handler is None:
        handler = StderrHandler()
        logger.addHandler(handler)
    handler.setFormatter(logging.Formatter(format_string or DEFAULT_FORMAT))
    set_log_level(level, logger)
    return logger


def set_log_level(level: str, target: Optional[logging.Logger] = None):
    """
    Change the level of the flocstab logger and its handlers

    Args:
        level: DEBUG, INFO, WARNING, ERROR or CRITICAL, any case
    """
    target = target or logging.getLogger(LOGGER_NAME)
    value = _level(level)
    target.setLevel(value)
    for handler in target.handlers:
        handler.setLevel(value)


logger = setup_logging()
