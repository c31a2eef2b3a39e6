"""Bounded worker pool for independent per-item jobs.

Results are indexed by input position, so the output is identical whatever
the worker count or completion order. Item failures are captured per item;
the callable must be picklable (module-level) when jobs > 1.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor, as_completed


def default_jobs() -> int:
    return os.cpu_count() or 1


def parallel_map(fn, items, jobs: int = 1, progress=None):
    """Apply fn to every item; returns (results, errors) aligned with items.

    errors[i] is None on success, otherwise the failure message; results[i]
    is None on failure. ``progress(index, error)`` is invoked as items
    complete (completion order is scheduler-dependent, content is not).
    """
    items = list(items)
    results: list = [None] * len(items)
    errors: list = [None] * len(items)
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    if jobs == 1 or len(items) <= 1:
        for i, item in enumerate(items):
            try:
                results[i] = fn(item)
            except Exception as exc:
                errors[i] = f"{type(exc).__name__}: {exc}"
            if progress is not None:
                progress(i, errors[i])
        return results, errors
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = {pool.submit(fn, item): i for i, item in enumerate(items)}
        for future in as_completed(futures):
            i = futures[future]
            try:
                results[i] = future.result()
            except Exception as exc:
                errors[i] = f"{type(exc).__name__}: {exc}"
            if progress is not None:
                progress(i, errors[i])
    return results, errors
