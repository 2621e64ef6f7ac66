"""Donor selection: pick the source slices whose style each target slice borrows.

Three strategies over a source collection:

* ``3d``  — rank whole scans by mean slice similarity; every target slice
            borrows from the same top-n scans at the matching index.
* ``2d``  — per target slice, rank the same-index slices of all scans.
* ``2.5d``— like 2d with candidates widened to a +/-m slice window,
            clipped at volume boundaries.

Ties are broken by (scan position, slice index) ascending so assignments
are fully deterministic.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import KswapError, ShapeMismatchError
from .srsim import DEFAULT_PARAMS, SrsimParams, srsim
from .volume import ScanCollection, Volume

STRATEGIES = ("3d", "2d", "2.5d")


class DonorRef(NamedTuple):
    scan_id: str
    slice_index: int
    score: float | None


@dataclass
class DonorAssignment:
    """Per-target-slice donor lists produced by one selection strategy."""

    per_slice: list[list[DonorRef]]
    strategy: str
    n: int
    m: int = 0

    def to_report(self) -> dict:
        return {
            "strategy": self.strategy,
            "n": self.n,
            "m": self.m,
            "per_slice": [
                [{"scan_id": r.scan_id, "slice_index": r.slice_index, "score": r.score}
                 for r in refs]
                for refs in self.per_slice
            ],
        }


@dataclass
class SliceScoreCache:
    """Similarity cache keyed by (target id, target slice, scan id, source slice).

    Concurrent insertion of distinct keys is safe; scores are pure functions
    of their inputs so racing writers store identical values.
    """

    _scores: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def score(self, target: Volume, i: int, scan: Volume, j: int, params: SrsimParams) -> float:
        key = (target.id, i, scan.id, j)
        with self._lock:
            hit = self._scores.get(key)
        if hit is not None:
            return hit
        value = srsim(target.data[i], scan.data[j], params)
        with self._lock:
            self._scores[key] = value
        return value


def _check_sources(target: Volume, sources: ScanCollection, need_equal_slices: bool) -> None:
    if not sources.scans:
        raise KswapError("source collection is empty")
    for scan in sources.scans:
        if scan.shape[1:] != target.shape[1:]:
            raise ShapeMismatchError(
                f"source scan '{scan.id}' slice shape {scan.shape[1:]} != "
                f"target '{target.id}' slice shape {target.shape[1:]}"
            )
        if need_equal_slices and scan.n_slices != target.n_slices:
            raise ShapeMismatchError(
                f"source scan '{scan.id}' has {scan.n_slices} slices, "
                f"target '{target.id}' has {target.n_slices}"
            )


def select_3d(target: Volume, sources: ScanCollection, n: int,
              params: SrsimParams = DEFAULT_PARAMS,
              cache: SliceScoreCache | None = None) -> DonorAssignment:
    """Rank whole scans; each target slice borrows from the top-n scans."""
    _check_sources(target, sources, need_equal_slices=True)
    cache = cache or SliceScoreCache()
    ranked = []
    for k, scan in enumerate(sources.scans):
        total = 0.0
        for i in range(target.n_slices):
            total += cache.score(target, i, scan, i, params)
        ranked.append((total / target.n_slices, k, scan.id))
    ranked.sort(key=lambda item: (-item[0], item[1]))
    top = ranked[: min(n, len(ranked))]
    per_slice = [
        [DonorRef(scan_id, i, score) for score, _, scan_id in top]
        for i in range(target.n_slices)
    ]
    return DonorAssignment(per_slice=per_slice, strategy="3d", n=n, m=0)


def _select_windowed(target: Volume, sources: ScanCollection, n: int, m: int,
                     params: SrsimParams, cache: SliceScoreCache | None,
                     strategy: str) -> DonorAssignment:
    _check_sources(target, sources, need_equal_slices=True)
    cache = cache or SliceScoreCache()
    n_slices = target.n_slices
    per_slice = []
    for i in range(n_slices):
        lo, hi = max(0, i - m), min(n_slices - 1, i + m)
        candidates = []
        for k, scan in enumerate(sources.scans):
            for j in range(lo, hi + 1):
                candidates.append((cache.score(target, i, scan, j, params), k, j, scan.id))
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        per_slice.append([
            DonorRef(scan_id, j, score)
            for score, _, j, scan_id in candidates[: min(n, len(candidates))]
        ])
    return DonorAssignment(per_slice=per_slice, strategy=strategy, n=n, m=m)


def select_2d(target: Volume, sources: ScanCollection, n: int,
              params: SrsimParams = DEFAULT_PARAMS,
              cache: SliceScoreCache | None = None) -> DonorAssignment:
    """Per-slice ranking among the same-index slices of all source scans."""
    return _select_windowed(target, sources, n, 0, params, cache, "2d")


def select_25d(target: Volume, sources: ScanCollection, n: int, m: int = 2,
               params: SrsimParams = DEFAULT_PARAMS,
               cache: SliceScoreCache | None = None) -> DonorAssignment:
    """Per-slice ranking with candidates widened to a +/-m slice window."""
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    return _select_windowed(target, sources, n, m, params, cache, "2.5d")


def select_donors(target: Volume, sources: ScanCollection, strategy: str, n: int,
                  m: int = 2, params: SrsimParams = DEFAULT_PARAMS,
                  cache: SliceScoreCache | None = None) -> DonorAssignment:
    """Dispatch on strategy name ('3d', '2d', '2.5d')."""
    if strategy == "3d":
        return select_3d(target, sources, n, params, cache)
    if strategy == "2d":
        return select_2d(target, sources, n, params, cache)
    if strategy == "2.5d":
        return select_25d(target, sources, n, m, params, cache)
    raise ValueError(f"unknown strategy '{strategy}', expected one of {STRATEGIES}")


def random_assignment(target: Volume, sources: ScanCollection, n: int,
                      rng: np.random.Generator, window: int = 0) -> DonorAssignment:
    """Donor choice by uniform per-slice sampling, no similarity involved.

    The null model for the ablation arms: each target slice draws n donors
    without replacement from the same candidate pool the ranked selection
    would see (same-index slices across scans, widened by ``window``). A
    pool smaller than n yields the whole pool. Scores are None since none
    are computed.
    """
    _check_sources(target, sources, need_equal_slices=True)
    if window < 0:
        raise ValueError(f"window must be >= 0, got {window}")
    n_slices = target.n_slices
    per_slice = []
    for i in range(n_slices):
        lo, hi = max(0, i - window), min(n_slices - 1, i + window)
        pool = [(scan.id, j) for scan in sources.scans for j in range(lo, hi + 1)]
        chosen = rng.choice(len(pool), size=min(n, len(pool)), replace=False)
        per_slice.append([DonorRef(pool[c][0], pool[c][1], None) for c in chosen])
    return DonorAssignment(per_slice=per_slice, strategy="2d" if window == 0 else "2.5d",
                           n=n, m=window)
