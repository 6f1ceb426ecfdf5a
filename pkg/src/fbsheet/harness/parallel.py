"""Replica-parallel evaluation with results merged in replica order."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable


def ordered_map(fn: Callable, items: Iterable, workers: int = 1, chunksize: int = 8) -> list:
    """``[fn(x) for x in items]``, optionally spread over worker processes.

    Results come back in input order whatever the worker count, and each
    replica draws from its own counter-based stream, so the output does not
    depend on ``workers``.  ``fn`` must be picklable when ``workers > 1``.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))
