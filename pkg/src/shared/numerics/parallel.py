"""
Thread-pool helpers for data-parallel checks.

Results always come back in input order, so reports assembled from them are
deterministic regardless of the worker count.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from shared.config import get_settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def worker_count(threads: int | None = None) -> int:
    return max(1, threads if threads is not None else get_settings().CHECK_THREADS)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """
    Ordered map over ``items``, fanned out to a thread pool when more than one worker
    is configured.
    """

    seq = list(items)
    workers = worker_count(threads)
    if workers == 1 or len(seq) < 2:
        return [fn(item) for item in seq]
    logger.debug("parallel map items=%s workers=%s", len(seq), workers)
    with ThreadPoolExecutor(max_workers=min(workers, len(seq))) as pool:
        return list(pool.map(fn, seq))

