"""Process-level fan-out honouring ``VOCATREE_THREADS`` (0 = one worker per CPU)."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

ENV_VAR = "VOCATREE_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        raw = os.environ.get(ENV_VAR, "1").strip() or "1"
        try:
            threads = int(raw)
        except ValueError:
            threads = 1
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def parallel_map(fn, items, threads: int | None = None) -> list:
    """Ordered map; results never depend on the worker count."""
    n = resolve_threads(threads)
    items = list(items)
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (4 * n))
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items, chunksize=chunk))
