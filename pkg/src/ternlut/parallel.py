"""Row-partitioned execution shared by the GEMM kernels.

Workers own disjoint row ranges of the output; nothing mutable is shared, so
the result does not depend on how many workers run.
"""

from __future__ import annotations

from concurrent.futures import Executor, ThreadPoolExecutor

import numpy as np


def row_partitions(m: int, granule: int, parts: int) -> list[tuple[int, int]]:
    """Split ``[0, m)`` into at most ``parts`` ranges whose starts are multiples of ``granule``."""
    units = -(-m // granule)
    parts = max(1, min(parts, units))
    bounds = [round(i * units / parts) for i in range(parts + 1)]
    return [(bounds[i] * granule, min(bounds[i + 1] * granule, m))
            for i in range(parts) if bounds[i + 1] > bounds[i]]


def map_rows(fn, m: int, granule: int, threads: int = 1,
             executor: Executor | None = None) -> np.ndarray:
    """Run ``fn(row0, row1)`` over row partitions and stack the row blocks."""
    if executor is None and threads <= 1:
        return fn(0, m)
    ranges = row_partitions(m, granule, threads if executor is None else max(threads, 1))
    if executor is not None:
        blocks = list(executor.map(lambda r: fn(*r), ranges))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(lambda r: fn(*r), ranges))
    return np.concatenate(blocks, axis=0)
