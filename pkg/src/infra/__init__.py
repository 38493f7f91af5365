"""Infrastructure components for protoneck.

This package provides foundational services that support the numerical core:
logging, output paths, config persistence and the worker pool.

Modules:
    logging: Structured logging with run (config hash) context
    storage: key = value RunConfig files
    paths: Centralized output-directory management
    pool: Bounded worker pool with deterministic result order

Example:
    from src.infra import get_logger, ConfigStore, get_run_dir

    logger = get_logger(__name__)
    config = ConfigStore(Path("base.cfg")).load()
    run_dir = get_run_dir("3f2a9c1d0e4b")
"""
from .logging import (
    configure_logging,
    get_logger,
    get_run_logger,
)

from .storage import ConfigStore

from .paths import (
    get_data_dir,
    get_run_dir,
    get_explain_dir,
)

from .pool import (
    get_thread_count,
    ordered_map,
)

__all__ = [
    # Logging
    "configure_logging",
    "get_logger",
    "get_run_logger",
    # Storage
    "ConfigStore",
    # Paths
    "get_data_dir",
    "get_run_dir",
    "get_explain_dir",
    # Pool
    "get_thread_count",
    "ordered_map",
]
