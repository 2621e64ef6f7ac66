"""Overlap metrics between predicted and ground-truth masks.

Boundary voxels are mask voxels with at least one face neighbor outside the
mask, where "outside" includes beyond the volume border, so a mask touching
the edge still has a boundary there. Distances come from the exact
Euclidean distance transform, which lets the result match a brute-force
all-pairs oracle to machine precision.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ShapeMismatchError, VolumeError
from .volume import Volume

_FACES = ndimage.generate_binary_structure(3, 1)


@dataclass(frozen=True)
class SurfaceDiceParams:
    tolerance: float = 1.0
    units: str = "voxel"  # "voxel" or "mm" (mm uses the volume spacing)
    connectivity: str = "face"

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")
        if self.units not in ("voxel", "mm"):
            raise ValueError(f"units must be 'voxel' or 'mm', got '{self.units}'")
        if self.connectivity != "face":
            raise ValueError(f"only face connectivity is supported, got '{self.connectivity}'")


def boundary_mask(mask: np.ndarray) -> np.ndarray:
    """Boundary voxels of a binary 3D array (face connectivity, border counts)."""
    m = mask.astype(bool)
    inner = ndimage.binary_erosion(m, structure=_FACES, border_value=0)
    return m & ~inner


def _as_binary(v: Volume, role: str) -> np.ndarray:
    if v.kind != "mask":
        raise VolumeError(f"{role} must be a mask volume, got kind '{v.kind}'")
    if not np.isin(v.data, (0.0, 1.0)).all():
        raise VolumeError(f"{role} '{v.id}' contains values outside {{0, 1}}")
    return v.data.astype(bool)


def surface_dice(pred: Volume, gt: Volume,
                 params: SurfaceDiceParams = SurfaceDiceParams()) -> float:
    """Fraction of boundary voxels lying within tolerance of the other boundary.

    Both masks empty is defined as 1.0, exactly one empty as 0.0.
    """
    if pred.shape != gt.shape:
        raise ShapeMismatchError(f"pred shape {pred.shape} != gt shape {gt.shape}")
    p = _as_binary(pred, "pred")
    g = _as_binary(gt, "gt")
    bp = boundary_mask(p)
    bg = boundary_mask(g)
    n_p, n_g = int(bp.sum()), int(bg.sum())
    if n_p == 0 and n_g == 0:
        return 1.0
    if n_p == 0 or n_g == 0:
        return 0.0
    sampling = gt.spacing if params.units == "mm" else None
    dist_to_g = ndimage.distance_transform_edt(~bg, sampling=sampling)
    dist_to_p = ndimage.distance_transform_edt(~bp, sampling=sampling)
    matched_p = int((dist_to_g[bp] <= params.tolerance).sum())
    matched_g = int((dist_to_p[bg] <= params.tolerance).sum())
    return (matched_p + matched_g) / (n_p + n_g)


def dice(pred: Volume, gt: Volume) -> float:
    """Volumetric overlap 2|P&G| / (|P|+|G|); both empty is defined as 1.0."""
    if pred.shape != gt.shape:
        raise ShapeMismatchError(f"pred shape {pred.shape} != gt shape {gt.shape}")
    p = _as_binary(pred, "pred")
    g = _as_binary(gt, "gt")
    total = int(p.sum()) + int(g.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((p & g).sum()) / total
