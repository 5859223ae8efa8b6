"""Fixed-geometry chunked execution.

Row-parallel stages always split work into the same contiguous chunks no
matter how many workers run them, and every chunk writes only its own
output slice. That keeps results bit-identical between threads=1 and
threads=n: the worker count changes scheduling, never arithmetic.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

CHUNK_ROWS = 512


def chunk_ranges(n: int, chunk: int = CHUNK_ROWS) -> list[tuple[int, int]]:
    return [(start, min(start + chunk, n)) for start in range(0, n, chunk)]


def run_chunked(fn: Callable[[int, int], None], n: int, threads: int = 1) -> None:
    """Run fn(start, stop) over fixed chunks, optionally on a thread pool."""
    ranges = chunk_ranges(n)
    if threads <= 1 or len(ranges) <= 1:
        for start, stop in ranges:
            fn(start, stop)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(lambda r: fn(*r), ranges))
