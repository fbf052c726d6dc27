"""Shared utilities for the Floquet analyzer modules."""

import sys
from concurrent.futures import ThreadPoolExecutor, as_completed

from config import get_max_workers, get_verbosity

_LEVELS = {"error": 0, "warning": 0, "info": 1, "debug": 2}
_PREFIXES = {"error": "Error: ", "warning": "Warning: ", "info": "", "debug": "[debug] "}


def log(message, level="info"):
    """
    Print a diagnostic line to stderr, filtered by FLOQUET_VERBOSE.

    Standard output is reserved for reports, so nothing here touches it.

    Args:
        message: Text to print
        level: One of "error", "warning", "info", "debug"
    """
    if _LEVELS[level] > get_verbosity():
        return
    print(f"{_PREFIXES[level]}{message}", file=sys.stderr)


def map_parallel(func, items, max_workers=None):
    """
    Apply func to every item on a thread pool, preserving input order.

    The first exception raised by any worker is re-raised after the pool drains.

    Args:
        func: Callable taking one item
        items: Sequence of inputs
        max_workers: Pool size (defaults to FLOQUET_MAX_WORKERS)

    Returns:
        list: Results in the same order as items
    """
    items = list(items)
    if max_workers is None:
        max_workers = get_max_workers()
    if max_workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    results = [None] * len(items)
    first_error = None
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {executor.submit(func, item): idx for idx, item in enumerate(items)}
        for future in as_completed(futures):
            idx = futures[future]
            try:
                results[idx] = future.result()
            except Exception as e:
                log(f"❌ Grid task {idx} failed: {e}", "debug")
                if first_error is None:
                    first_error = e
    if first_error is not None:
        raise first_error
    return results
