"""Worker-pool plumbing shared by the CLI commands."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

WORKERS_ENV = "KSWAP_WORKERS"


def resolve_workers(requested: int | None = None) -> int:
    """Worker count: explicit flag, else the KSWAP_WORKERS env var, else CPUs."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def ordered_map(fn, items, workers: int = 1) -> list:
    """Map over items, preserving order; tasks must be pure for determinism."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
