"""Grid search over swap sizes and the two beta-selection policies."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from .donors import SliceScoreCache, select_donors
from .errors import KswapError
from .metrics import SurfaceDiceParams, surface_dice
from .srsim import DEFAULT_PARAMS, SrsimParams
from .transfer import TransferConfig, multi_source_transfer
from .volume import ScanCollection, binarize_probability

logger = logging.getLogger(__name__)

DEFAULT_BETA_GRID = (0.01, 0.02, 0.03, 0.05, 0.07, 0.10)


@dataclass(frozen=True)
class BetaCurve:
    """Mean surface-dice score per beta for one source-target domain pair."""

    pair_id: tuple[str, str]
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        betas = [b for b, _ in self.points]
        if not betas:
            raise ValueError("a curve needs at least one point")
        if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError(f"betas must be strictly increasing, got {betas}")
        if any(not 0.0 <= s <= 1.0 for _, s in self.points):
            raise ValueError("scores must lie in [0, 1]")

    @property
    def betas(self) -> tuple[float, ...]:
        return tuple(b for b, _ in self.points)

    @property
    def scores(self) -> tuple[float, ...]:
        return tuple(s for _, s in self.points)


def validate_grid(grid) -> list[float]:
    grid = [float(b) for b in grid]
    if not grid:
        raise ValueError("beta grid must be nonempty")
    if any(not 0.0 <= b <= 1.0 for b in grid):
        raise ValueError(f"betas must lie in [0, 1], got {grid}")
    if any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
        raise ValueError(f"beta grid must be strictly increasing, got {grid}")
    return grid


def evaluate_pair_at_beta(sources: ScanCollection, targets: ScanCollection, beta: float,
                          strategy: str, cfg: TransferConfig, predictor,
                          srsim_params: SrsimParams = DEFAULT_PARAMS, m: int = 2,
                          surface_params: SurfaceDiceParams = SurfaceDiceParams(),
                          caches: list[SliceScoreCache] | None = None) -> float:
    """Mean surface dice over target scans for one (pair, beta) cell."""
    if targets.masks is None:
        raise KswapError(f"target collection '{targets.domain}' has no ground-truth masks")
    cfg_b = replace(cfg, beta=beta)
    total = 0.0
    for idx, (scan, gt) in enumerate(zip(targets.scans, targets.masks)):
        cache = caches[idx] if caches is not None else None
        assignment = select_donors(scan, sources, strategy, cfg.n_mst, m, srsim_params, cache)
        prob = multi_source_transfer(scan, sources, assignment, cfg_b, predictor)
        pred = binarize_probability(prob, cfg.binarize_threshold)
        total += surface_dice(pred, gt, surface_params)
    return total / len(targets.scans)


def grid_search(pairs, grid, strategy: str, cfg: TransferConfig, predictor,
                srsim_params: SrsimParams = DEFAULT_PARAMS, m: int = 2,
                surface_params: SurfaceDiceParams = SurfaceDiceParams(),
                failures: list | None = None) -> list[BetaCurve]:
    """One curve per (sources, targets) pair over a strictly increasing grid.

    A pair whose volumes are shape-incompatible is skipped with a recorded
    failure (appended to ``failures`` when given); remaining pairs proceed.
    """
    grid = validate_grid(grid)
    curves = []
    for sources, targets in pairs:
        pair_id = (sources.domain, targets.domain)
        caches = [SliceScoreCache() for _ in targets.scans]
        try:
            points = tuple(
                (beta, evaluate_pair_at_beta(sources, targets, beta, strategy, cfg,
                                             predictor, srsim_params, m, surface_params,
                                             caches))
                for beta in grid
            )
        except KswapError as exc:
            logger.warning("pair %s -> %s failed: %s", pair_id[0], pair_id[1], exc)
            if failures is not None:
                failures.append({"pair": list(pair_id), "error": str(exc)})
            continue
        curves.append(BetaCurve(pair_id=pair_id, points=points))
    return curves


def optimal_per_pair(curves) -> dict[tuple[str, str], float]:
    """Per pair, the beta with the highest score; ties go to the smaller beta."""
    if not curves:
        raise ValueError("need at least one curve")
    best = {}
    for curve in curves:
        top_beta, top_score = curve.points[0]
        for beta, score in curve.points[1:]:
            if score > top_score:
                top_beta, top_score = beta, score
        best[curve.pair_id] = top_beta
    return best


def averaged_optimal(curves) -> float:
    """The beta whose mean score across pairs is highest; ties go smaller."""
    if not curves:
        raise ValueError("need at least one curve")
    grid = curves[0].betas
    for curve in curves[1:]:
        if curve.betas != grid:
            raise ValueError(
                f"curves must share one grid: {grid} vs {curve.betas} ({curve.pair_id})"
            )
    best_beta, best_mean = grid[0], sum(c.scores[0] for c in curves) / len(curves)
    for j, beta in enumerate(grid[1:], start=1):
        mean = sum(c.scores[j] for c in curves) / len(curves)
        if mean > best_mean:
            best_beta, best_mean = beta, mean
    return best_beta
