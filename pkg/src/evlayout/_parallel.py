from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    return os.cpu_count() or 1


def map_ordered(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """``list(map(fn, items))`` on a thread pool; results keep input order."""
    items = list(items)
    n = default_workers() if workers is None else int(workers)
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))


def chunk_ranges(n: int, size: int):
    return [(lo, min(n, lo + size)) for lo in range(0, n, size)] or [(0, 0)]
