"""Slice-to-probability predictors.

The contract: ``predict(plane, index)`` maps an H x W intensity plane in
[0, 1] to an H x W probability plane in [0, 1], deterministically. The
baseline segmenter is a threshold-plus-morphology stand-in that needs no
training; the precomputed predictor replays stored probability maps so real
model outputs can be plugged into the harness.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import expit

from .errors import KswapError
from .volume import Volume


class Predictor:
    """Base predictor contract; implementations must be pure and stateless."""

    name = "abstract"

    def predict(self, plane: np.ndarray, index: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class BaselineSegmenterParams:
    threshold: float = 0.35
    opening_radius: int = 1
    keep_largest_component: bool = True
    softness: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.softness <= 0:
            raise ValueError(f"softness must be > 0, got {self.softness}")
        if self.opening_radius < 0:
            raise ValueError(f"opening_radius must be >= 0, got {self.opening_radius}")


def _disk(radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    return (r[:, None] ** 2 + r[None, :] ** 2) <= radius * radius


_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


def baseline_predict(plane: np.ndarray,
                     params: BaselineSegmenterParams = BaselineSegmenterParams()) -> np.ndarray:
    """Soft threshold segmentation with optional morphological cleanup.

    soft = logistic((plane - threshold) / softness). With
    keep_largest_component the soft map is zeroed outside the largest
    4-connected component of the binary-opened support (soft > 0.5);
    without it the raw soft map is returned, which is pointwise monotone
    in the input intensity.
    """
    plane = np.asarray(plane, dtype=np.float64)
    if not np.isfinite(plane).all():
        raise ValueError("plane contains non-finite values")
    soft = expit((plane - params.threshold) / params.softness)
    if not params.keep_largest_component:
        return soft
    support = soft > 0.5
    if params.opening_radius > 0:
        support = ndimage.binary_opening(support, structure=_disk(params.opening_radius))
    labels, n = ndimage.label(support, structure=_FOUR_CONNECTED)
    if n == 0:
        return np.zeros_like(soft)
    sizes = ndimage.sum_labels(np.ones_like(soft), labels, index=np.arange(1, n + 1))
    largest = int(np.argmax(sizes)) + 1
    return np.where(labels == largest, soft, 0.0)


class BaselineSegmenter(Predictor):
    """Threshold + morphology segmenter, sensitive to intensity-domain shift."""

    name = "baseline"

    def __init__(self, params: BaselineSegmenterParams | None = None):
        self.params = params or BaselineSegmenterParams()

    def predict(self, plane: np.ndarray, index: int) -> np.ndarray:
        return baseline_predict(plane, self.params)


def precomputed_predict(slice_index: int, store: Volume) -> np.ndarray:
    """Return the stored probability plane for one slice, unchanged."""
    if store.kind != "probability":
        raise KswapError(f"precomputed store must be a probability volume, got '{store.kind}'")
    if not 0 <= slice_index < store.n_slices:
        raise KswapError(
            f"slice index {slice_index} out of range for store with {store.n_slices} slices"
        )
    return store.data[slice_index].copy()


class PrecomputedPredictor(Predictor):
    """Replays probability maps from a stored volume, ignoring pixel input."""

    name = "precomputed"

    def __init__(self, store: Volume):
        if store.kind != "probability":
            raise KswapError(f"precomputed store must be a probability volume, got '{store.kind}'")
        self.store = store

    def predict(self, plane: np.ndarray, index: int) -> np.ndarray:
        return precomputed_predict(index, self.store)
