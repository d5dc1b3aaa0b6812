"""
Logging configuration using Rich
"""

import logging

from rich.logging import RichHandler


def setup_logger(name: str = "epivo", level: int = logging.INFO) -> logging.Logger:
    """
    Set up a logger with Rich formatting

    Args:
        name: Logger name
        level: Logging level

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)

    if not logger.handlers:
        handler = RichHandler(
            rich_tracebacks=True,
            markup=True,
            show_time=True,
            show_path=False,
        )
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)

    return logger


def set_log_level(level: str | int) -> None:
    """Change the package logger level (accepts names like ``"DEBUG"``)."""
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            raise ValueError(f"Unknown log level: {level}")
    logger.setLevel(level)


logger = setup_logger()
