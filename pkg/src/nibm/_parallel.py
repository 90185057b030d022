"""Deterministic helpers for optional thread parallelism.

Grid evaluations can fan out over a thread pool; results are always
collected in input order so the output never depends on scheduling.  The
pool size comes from an explicit argument, else the NIBM_THREADS
environment variable, else a conservative default.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from ._errors import InvalidArgumentError


def thread_count(explicit: int | None = None) -> int:
    """Resolve the worker count from argument, environment, or default."""
    if explicit is not None:
        if not isinstance(explicit, int) or isinstance(explicit, bool) or explicit < 1:
            raise InvalidArgumentError(f"thread count must be a positive integer, got {explicit!r}")
        return explicit
    raw = os.environ.get("NIBM_THREADS")
    if raw is not None:
        try:
            value = int(raw)
        except ValueError:
            raise InvalidArgumentError(f"NIBM_THREADS must be an integer, got {raw!r}") from None
        if value < 1:
            raise InvalidArgumentError(f"NIBM_THREADS must be positive, got {value}")
        return value
    return min(os.cpu_count() or 1, 8)


def ordered_map(fn, items, threads: int | None = None) -> list:
    """Map fn over items, preserving order, optionally on a thread pool."""
    items = list(items)
    workers = thread_count(threads)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
