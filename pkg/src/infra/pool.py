"""Bounded worker pool with deterministic result order.

Data generation, evaluation and rendering are pure per image, so they may be
spread over threads; results always come back in input order so reductions
stay bit-identical regardless of the worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from .logging import get_logger

__all__ = ["THREADS_ENV", "get_thread_count", "ordered_map"]

THREADS_ENV = "PROTONECK_THREADS"

_logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def get_thread_count(default: Optional[int] = None) -> int:
    """Resolve the worker cap from PROTONECK_THREADS (minimum 1)."""
    fallback = default if default is not None else min(4, os.cpu_count() or 1)
    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return max(1, fallback)
    try:
        return max(1, int(raw))
    except ValueError:
        _logger.warning(f"Invalid {THREADS_ENV} value '{raw}', using {fallback}")
        return max(1, fallback)


def ordered_map(fn: Callable[[T], R], items: Iterable[T], *, workers: Optional[int] = None) -> List[R]:
    """Apply ``fn`` to every item, returning results in input order."""
    items = list(items)
    count = workers if workers is not None else get_thread_count()
    if count <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=count) as executor:
        return list(executor.map(fn, items))
