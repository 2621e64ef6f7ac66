"""2D slice spectra and the circular low-frequency mask.

Conventions: unnormalized forward transform, 1/(H*W) inverse, spectra
centered with the DC bin at (H//2, W//2).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError


@dataclass(frozen=True)
class SliceSpectrum:
    """Centered amplitude and phase planes of one 2D slice."""

    amplitude: np.ndarray
    phase: np.ndarray


@dataclass(frozen=True)
class MaskPlane:
    """Binary low-frequency disk for a given swap fraction beta."""

    values: np.ndarray
    beta: float


def decompose(plane: np.ndarray) -> SliceSpectrum:
    """Forward transform of a 2D plane into a centered amplitude/phase pair."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2:
        raise ValueError(f"expected a 2D plane, got shape {plane.shape}")
    if not np.isfinite(plane).all():
        raise ValueError("plane contains non-finite values")
    f = np.fft.fftshift(np.fft.fft2(plane))
    return SliceSpectrum(amplitude=np.abs(f), phase=np.angle(f))


def recompose(spec: SliceSpectrum) -> np.ndarray:
    """Inverse transform back to a real 2D plane.

    Warns if the imaginary residual exceeds 1e-4, which indicates the
    spectrum was not Hermitian-consistent.
    """
    if spec.amplitude.shape != spec.phase.shape:
        raise ShapeMismatchError(
            f"amplitude shape {spec.amplitude.shape} != phase shape {spec.phase.shape}"
        )
    f = spec.amplitude * np.exp(1j * spec.phase)
    out = np.fft.ifft2(np.fft.ifftshift(f))
    residual = float(np.abs(out.imag).max())
    if residual > 1e-4:
        warnings.warn(f"imaginary residual {residual:.3g} after inverse transform", stacklevel=2)
    return out.real


def mask_radius(h: int, w: int, beta: float) -> int:
    """Integer disk radius for a swap fraction: floor(beta * min(h, w) / 2).

    beta = 1 reaches the inscribed disk. Isolated here so the radius law can
    be swapped without touching the mask construction.
    """
    return int(math.floor(beta * min(h, w) / 2.0))


def circular_mask(h: int, w: int, beta: float) -> MaskPlane:
    """Binary disk of radius ``mask_radius`` around the center pixel.

    The boundary is inclusive; beta = 0 yields the empty plane, any
    beta > 0 contains at least the DC pixel.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    if beta == 0.0:
        return MaskPlane(values=np.zeros((h, w), dtype=bool), beta=0.0)
    r = mask_radius(h, w, beta)
    dy = np.arange(h) - h // 2
    dx = np.arange(w) - w // 2
    d2 = dy[:, None] ** 2 + dx[None, :] ** 2
    return MaskPlane(values=d2 <= r * r, beta=float(beta))
