"""Logging for the solver stages.

Every stage logs under the "sde" root: "sde.BankSolver", "sde.Equilibrium"
and so on. The root is configured once, on the first call, with a DEBUG
trace file and a console handler. SDE_LOG_FILE moves the trace file and
SDE_LOG_LEVEL sets the console threshold (INFO by default).
"""
import logging
import os
import sys
from typing import Optional

from src.utils.errors import ConfigError

ROOT_NAME = "sde"
LOG_FILE_ENV = "SDE_LOG_FILE"
LOG_LEVEL_ENV = "SDE_LOG_LEVEL"
DEFAULT_LOG_FILE = "solver.log"
DEFAULT_CONSOLE_LEVEL = "INFO"

FILE_FORMAT = "%(asctime)s | %(name)s | %(levelname)s | %(message)s"
CONSOLE_FORMAT = "%(levelname)s: %(message)s"


def console_level() -> int:
    raw = os.environ.get(LOG_LEVEL_ENV, DEFAULT_CONSOLE_LEVEL).strip().upper()
    level = logging.getLevelName(raw)
    if not isinstance(level, int):
        raise ConfigError(f"{LOG_LEVEL_ENV} must name a logging level, got '{raw}'")
    return level


def configure_logging(log_file: Optional[str] = None, force: bool = False) -> logging.Logger:
    """Attach the trace file and console handlers to the "sde" root.

    A configured root is returned as is unless force is set, in which case
    its handlers are closed and replaced.
    """
    root = logging.getLogger(ROOT_NAME)
    if root.handlers and not force:
        return root
    for handler in root.handlers[:]:
        handler.close()
        root.removeHandler(handler)

    root.setLevel(logging.DEBUG)
    path = log_file or os.environ.get(LOG_FILE_ENV, DEFAULT_LOG_FILE)

    # delay: no file appears until a record is written
    trace = logging.FileHandler(path, encoding="utf-8", delay=True)
    trace.setLevel(logging.DEBUG)
    trace.setFormatter(logging.Formatter(FILE_FORMAT))

    console = logging.StreamHandler(sys.stdout)
    console.setLevel(console_level())
    console.setFormatter(logging.Formatter(CONSOLE_FORMAT))

    root.addHandler(trace)
    root.addHandler(console)
    return root


def setup_solver_logger(name: str) -> logging.Logger:
    """Stage logger "sde.<name>"; its records go through the shared root handlers."""
    configure_logging()
    return logging.getLogger(f"{ROOT_NAME}.{name}")
