"""Worker-pool plumbing.

Parallelism never changes results: every parallel map preserves input order
and each work item draws from its own pre-derived RNG stream.  The worker
count comes from ``WARPCHECK_WORKERS`` (default: up to 4).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    env = os.environ.get("WARPCHECK_WORKERS", "").strip()
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def pmap(fn, items, workers=None) -> list:
    """Order-preserving map, threaded when workers > 1."""
    items = list(items)
    if workers is None:
        workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
