"""Optional thread fan-out for per-view work, capped by FOCUSCAL_THREADS."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["thread_count", "map_ordered"]


def thread_count() -> int:
    """Worker cap from the FOCUSCAL_THREADS environment variable (0 = auto)."""
    raw = os.environ.get("FOCUSCAL_THREADS", "").strip()
    if raw in ("", "0"):
        return min(os.cpu_count() or 1, 8)
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def map_ordered(fn, items):
    """Apply ``fn`` over ``items`` preserving order, threading when allowed."""
    items = list(items)
    workers = thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
