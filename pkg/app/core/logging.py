"""
Logging for the library and the CLI.

Every module logs through a child of the ``app`` package logger. The package
logger owns the only handler, which writes to stderr so that the JSON lines a
command prints on stdout stay parseable.
"""

import logging
import sys

from app.core.config import settings

PACKAGE_LOGGER = "app"
LOG_FORMAT = "      %(levelname)-5s  [%(module)s] %(message)s"


def _level() -> str:
    return "DEBUG" if settings.DEBUG else settings.LOG_LEVEL.upper()


def configure_package_logger() -> logging.Logger:
    """
    Attach the stderr handler to the package logger once and apply the level.

    Returns:
        The package logger
    """
    root = logging.getLogger(PACKAGE_LOGGER)
    root.setLevel(_level())
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
        root.propagate = False
    return root


def get_logger(name: str) -> logging.Logger:
    """
    Logger for a module of this package.

    Args:
        name: Module name, usually ``__name__``; names outside the package are
            placed under it

    Returns:
        Logger whose records reach the package handler
    """
    configure_package_logger()
    if name != PACKAGE_LOGGER and not name.startswith(PACKAGE_LOGGER + "."):
        name = f"{PACKAGE_LOGGER}.{name}"
    return logging.getLogger(name)
