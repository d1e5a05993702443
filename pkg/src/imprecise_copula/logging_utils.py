"""Logging setup for the command-line entry points."""

import logging
from pathlib import Path
from typing import Optional, Union

_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


class StageFormatter(logging.Formatter):
    """Formatter that appends the ``stage`` extra field when a record carries one."""

    def format(self, record: logging.LogRecord) -> str:
        message = super().format(record)
        stage = getattr(record, "stage", None)
        if stage:
            message = f"{message} [stage={stage}]"
        return message


def setup_logging(
    level: Union[int, str] = logging.INFO, log_file: Optional[Union[str, Path]] = None
) -> logging.Logger:
    """
    Configure the package logger once.

    Args:
        level: Logging level name or number
        log_file: Optional path that receives a copy of every record

    Returns:
        The configured ``imprecise_copula`` logger
    """
    logger = logging.getLogger("imprecise_copula")
    logger.setLevel(level)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = StageFormatter(_FORMAT)
    stream = logging.StreamHandler()
    stream.setFormatter(formatter)
    logger.addHandler(stream)

    if log_file is not None:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    logger.propagate = False
    return logger
