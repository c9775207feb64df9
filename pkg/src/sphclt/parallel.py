"""Deterministic work splitting.

Work is cut into chunks whose boundaries depend only on the task (never on
the worker count), each chunk is pure, and results are merged in chunk order.
Consequently any `threads` setting produces bit-identical output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

CHUNK = 64


def fixed_chunks(n_items: int, chunk: int = CHUNK):
    """[(start, stop), ...] covering range(n_items) in fixed-size pieces."""
    return [(lo, min(lo + chunk, n_items)) for lo in range(0, n_items, chunk)]


def ordered_map(fn, items, threads: int = 1):
    """Map preserving order; threads only affect wall time, not results."""
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
