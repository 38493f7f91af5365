"""Logging setup shared by every protoneck module.

One ``protoneck`` logger tree, configured from the environment on first
use: a stderr handler plus an optional rotating log file. Module loggers are
named after their subpackage (``protoneck.train.trainer``), and training or
evaluation code logs through a run adapter that tags each line with the
config hash.
"""
from __future__ import annotations

import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import List, Optional

__all__ = [
    "get_logger",
    "get_run_logger",
    "configure_logging",
    "RunLoggerAdapter",
    "LOG_LEVEL_ENV",
    "LOG_FILE_ENV",
    "LOG_FORMAT_ENV",
]

# Section: Environment Variable Names
LOG_LEVEL_ENV = "PROTONECK_LOG_LEVEL"
LOG_FILE_ENV = "PROTONECK_LOG_FILE"
LOG_FORMAT_ENV = "PROTONECK_LOG_FORMAT"

# Section: Defaults
_ROOT = "protoneck"
_PACKAGE = "src"
_DEFAULT_LOG_FILE = Path(".protoneck") / "protoneck.log"
_DEFAULT_LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)-26s | %(message)s"
_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
_ROTATE_BYTES = 10 * 1024 * 1024
_ROTATE_BACKUPS = 5

_configured = False


def _level_from_env() -> int:
    name = os.environ.get(LOG_LEVEL_ENV, "INFO").strip().upper()
    level = logging.getLevelNamesMapping().get(name)
    return level if isinstance(level, int) and level > logging.NOTSET else logging.INFO


def _log_file_from_env() -> Optional[Path]:
    """Log file path; unset means the default under ``.protoneck/``, empty disables the file."""
    raw = os.environ.get(LOG_FILE_ENV)
    if raw is None:
        return _DEFAULT_LOG_FILE.resolve()
    return Path(raw).expanduser().resolve() if raw.strip() else None


def _build_handlers(level: int, formatter: logging.Formatter, log_file: Optional[Path]) -> List[logging.Handler]:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(
            RotatingFileHandler(log_file, maxBytes=_ROTATE_BYTES, backupCount=_ROTATE_BACKUPS, encoding="utf-8")
        )
    for handler in handlers:
        handler.setLevel(level)
        handler.setFormatter(formatter)
    return handlers


def configure_logging(*, force: bool = False) -> None:
    """Attach handlers to the ``protoneck`` logger.

    Runs once per process unless ``force`` is set, which re-reads
    PROTONECK_LOG_LEVEL, PROTONECK_LOG_FILE and PROTONECK_LOG_FORMAT and
    replaces the existing handlers.
    """
    global _configured
    if _configured and not force:
        return

    level = _level_from_env()
    formatter = logging.Formatter(os.environ.get(LOG_FORMAT_ENV, _DEFAULT_LOG_FORMAT), datefmt=_DATE_FORMAT)
    root = logging.getLogger(_ROOT)
    root.setLevel(level)
    root.propagate = False
    for handler in list(root.handlers):
        handler.close()
        root.removeHandler(handler)

    log_file = _log_file_from_env()
    try:
        handlers = _build_handlers(level, formatter, log_file)
    except OSError as exc:
        handlers = _build_handlers(level, formatter, None)
        root.addHandler(handlers[0])
        root.warning(f"File logging to {log_file} disabled: {exc}")
    else:
        for handler in handlers:
            root.addHandler(handler)
    _configured = True


def get_logger(name: str) -> logging.Logger:
    """Logger for a module, e.g. ``get_logger(__name__)``.

    ``src.train.trainer`` becomes ``protoneck.train.trainer``; names outside
    the package are hung directly under ``protoneck``.
    """
    configure_logging()
    if name == _ROOT or name.startswith(_ROOT + "."):
        return logging.getLogger(name)
    parts = name.split(".")
    if parts[0] == _PACKAGE:
        parts = parts[1:]
    return logging.getLogger(".".join([_ROOT, *parts]) if parts else _ROOT)


# Section: Run-scoped Logging
class RunLoggerAdapter(logging.LoggerAdapter):
    """Prefixes messages with ``[<hash[:8]>]`` of the run's config."""

    def __init__(self, logger: logging.Logger, config_hash: str) -> None:
        super().__init__(logger, {"config_hash": config_hash})
        self.prefix = f"[{config_hash[:8]}] "

    def process(self, msg: object, kwargs: dict) -> tuple[str, dict]:  # type: ignore[override]
        return f"{self.prefix}{msg}", kwargs


def get_run_logger(name: str, config_hash: str) -> RunLoggerAdapter:
    """Module logger tagged with a config hash.

    Example:
        >>> logger = get_run_logger(__name__, "3f2a9c1d0e4b")
        >>> logger.info("epoch 3 total=1.204")
        # 2026-01-01 12:00:00 | INFO     | protoneck.train.trainer    | [3f2a9c1d] epoch 3 total=1.204
    """
    return RunLoggerAdapter(get_logger(name), config_hash)
