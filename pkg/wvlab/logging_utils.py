import logging
import sys
from typing import Optional

from pythonjsonlogger import jsonlogger

from wvlab.settings import get_settings

JSON_FORMAT = '%(asctime)s %(levelname)s %(name)s %(message)s'


def setup_logging(service_name: str = "wvlab", level: Optional[str] = None) -> logging.Logger:
    """
    Set up structured JSON logging on stderr for the given service.

    Calling it again replaces the handler instead of stacking a second one,
    so repeated CLI invocations in one process log once per record.
    """
    logger = logging.getLogger(service_name)
    logger.setLevel((level or get_settings().log_level).upper())

    json_formatter = jsonlogger.JsonFormatter(JSON_FORMAT)

    for handler in list(logger.handlers):
        if getattr(handler, "_wvlab_handler", False):
            logger.removeHandler(handler)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(json_formatter)
    console_handler._wvlab_handler = True
    logger.addHandler(console_handler)

    return logger


def log_run(logger, scenario, seed, command, threads):
    """
    Log the start of a CLI run
    """
    logger.info(
        "Run started",
        extra={
            "scenario": scenario,
            "seed": seed,
            "command": command,
            "threads": threads,
        }
    )


def log_error(logger, scenario, error, context=None):
    """
    Log error details
    """
    logger.error(
        "Error occurred",
        extra={
            "scenario": scenario,
            "error": str(error),
            "error_type": type(error).__name__,
            "context": context,
        }
    )
