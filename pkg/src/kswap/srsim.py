"""Spectral-residual similarity between 2D slices.

The score combines a spectral-residual visual saliency map (computed on a
downsampled grid) with full-resolution Scharr gradient magnitudes:

    S_VS = (2*VS1*VS2 + c1) / (VS1^2 + VS2^2 + c1)
    S_G  = (2*G1*G2 + c2') / (G1^2 + G2^2 + c2')
    score = sum(S_VS * S_G^lam * max(VS1, VS2)) / sum(max(VS1, VS2))

c2 is specified on a 0-255 intensity scale and rescaled internally for
[0, 1] inputs (c2' = c2 / 255^2). The score is symmetric by construction
and equals 1.0 exactly for identical inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ShapeMismatchError
from .volume import Volume

_LOG_EPS = 1e-8
_SCHARR = np.array([[3.0, 0.0, -3.0], [10.0, 0.0, -10.0], [3.0, 0.0, -3.0]]) / 16.0


@dataclass(frozen=True)
class SrsimParams:
    """Tuning constants; every value the similarity depends on lives here."""

    downsample_target: int = 64
    residual_window: int = 3
    smoothing_sigma: float = 2.5
    c1: float = 0.40
    c2: float = 225.0  # on a 0-255 intensity scale; rescaled internally
    lam: float = 0.5

    def __post_init__(self):
        for name in ("downsample_target", "residual_window", "smoothing_sigma", "c1", "c2", "lam"):
            if getattr(self, name) <= 0:
                raise ValueError(f"SrsimParams.{name} must be strictly positive")


DEFAULT_PARAMS = SrsimParams()


def _is_flat(plane: np.ndarray) -> bool:
    return bool((plane == plane.flat[0]).all())


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    # W[i, j] = fraction of output cell i covered by input cell j
    scale = n_in / n_out
    w = np.zeros((n_out, n_in))
    for i in range(n_out):
        lo, hi = i * scale, (i + 1) * scale
        for j in range(int(np.floor(lo)), min(int(np.ceil(hi)), n_in)):
            w[i, j] = min(hi, j + 1) - max(lo, j)
    return w / scale


def _area_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Exact box-average resampling (each output pixel integrates its cell)."""
    wr = _area_weights(img.shape[0], out_h)
    wc = _area_weights(img.shape[1], out_w)
    return wr @ img @ wc.T


def _bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = img.shape
    rows = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    cols = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return ndimage.map_coordinates(img, [rr, cc], order=1, mode="nearest")


def spectral_residual_saliency(plane: np.ndarray, params: SrsimParams = DEFAULT_PARAMS) -> np.ndarray:
    """Visual saliency of one slice via the spectral-residual construction.

    Pipeline: box-average downsample so the longer side equals
    ``downsample_target`` (images already at or below that size are left
    alone), log-amplitude residual against a box filter, reconstruction with
    the original phase, squared magnitude, Gaussian smoothing, bilinear
    upsample back to the input size. Output is non-negative.
    """
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    if h < 8 or w < 8:
        raise ValueError(f"slice {plane.shape} smaller than 8x8")
    if _is_flat(plane):
        # A flat image has no spectral residual; the log-amplitude pipeline
        # degenerates on its exact spectral zeros, so short-circuit.
        return np.zeros((h, w))
    longer = max(h, w)
    if longer > params.downsample_target:
        scale = params.downsample_target / longer
        small = _area_resize(plane, max(8, round(h * scale)), max(8, round(w * scale)))
    else:
        small = plane

    f = np.fft.fft2(small)
    log_amp = np.log(np.abs(f) + _LOG_EPS)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=params.residual_window, mode="nearest")
    recon = np.fft.ifft2(np.exp(residual + 1j * np.angle(f)))
    saliency = np.abs(recon) ** 2
    saliency = ndimage.gaussian_filter(saliency, sigma=params.smoothing_sigma, mode="nearest")
    if saliency.shape != (h, w):
        saliency = _bilinear_resize(saliency, h, w)
    return saliency


def _gradient_magnitude(plane: np.ndarray) -> np.ndarray:
    gx = ndimage.convolve(plane, _SCHARR, mode="constant", cval=0.0)
    gy = ndimage.convolve(plane, _SCHARR.T, mode="constant", cval=0.0)
    return np.hypot(gx, gy)


def srsim(x: np.ndarray, y: np.ndarray, params: SrsimParams = DEFAULT_PARAMS) -> float:
    """Similarity score in (0, 1] between two same-shape slices in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeMismatchError(f"slice shapes differ: {x.shape} vs {y.shape}")
    flat_x, flat_y = _is_flat(x), _is_flat(y)
    if flat_x and flat_y and x.flat[0] == y.flat[0]:
        return 1.0

    vs1 = spectral_residual_saliency(x, params)
    vs2 = spectral_residual_saliency(y, params)
    g1 = _gradient_magnitude(x)
    g2 = _gradient_magnitude(y)
    c1 = params.c1
    c2 = params.c2 / 255.0**2
    s_vs = (2.0 * vs1 * vs2 + c1) / (vs1**2 + vs2**2 + c1)
    s_g = (2.0 * g1 * g2 + c2) / (g1**2 + g2**2 + c2)
    sim = s_vs * s_g**params.lam
    pool = np.maximum(vs1, vs2)
    denom = pool.sum()
    if flat_x and flat_y:
        denom += 1e-12  # two different flats: stabilize the near-zero pool
    return float((sim * pool).sum() / denom)


def scan_similarity_3d(s: Volume, t: Volume, params: SrsimParams = DEFAULT_PARAMS) -> float:
    """Mean per-index slice similarity between two scans of equal slice count."""
    if s.n_slices != t.n_slices:
        raise ShapeMismatchError(
            f"scan '{s.id}' has {s.n_slices} slices, scan '{t.id}' has {t.n_slices}"
        )
    total = 0.0
    for i in range(s.n_slices):
        total += srsim(s.data[i], t.data[i], params)
    return total / s.n_slices
