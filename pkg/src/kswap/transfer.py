"""Low-frequency amplitude swapping and multi-donor prediction averaging."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import KswapError, ShapeMismatchError
from .spectrum import MaskPlane, SliceSpectrum, circular_mask, decompose, recompose
from .volume import ScanCollection, Volume

logger = logging.getLogger(__name__)

AGGREGATIONS = ("mean_probability",)


@dataclass(frozen=True)
class TransferConfig:
    """Knobs of the adaptation step: swap size, donor count, aggregation."""

    beta: float
    n_mst: int = 7
    aggregation: str = "mean_probability"
    binarize_threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if self.n_mst < 1:
            raise ValueError(f"n_mst must be >= 1, got {self.n_mst}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation '{self.aggregation}'")
        if not 0.0 < self.binarize_threshold < 1.0:
            raise ValueError(f"binarize_threshold must be in (0, 1), got {self.binarize_threshold}")


def swap_amplitudes(source: SliceSpectrum, target: SliceSpectrum, mask: MaskPlane) -> SliceSpectrum:
    """Combined spectrum: source amplitude inside the mask, target elsewhere.

    Inside the mask the source amplitudes are taken bit for bit; the phase
    plane is the target's, untouched.
    """
    if source.amplitude.shape != target.amplitude.shape:
        raise ShapeMismatchError(
            f"spectra shapes differ: {source.amplitude.shape} vs {target.amplitude.shape}"
        )
    amplitude = np.where(mask.values, source.amplitude, target.amplitude)
    return SliceSpectrum(amplitude=amplitude, phase=target.phase)


def fda_swap(source_slice: np.ndarray, target_slice: np.ndarray, beta: float) -> np.ndarray:
    """Transfer the source's low-frequency amplitudes onto the target slice.

    Returns the adapted target slice, clipped to [0, 1]. beta = 0 returns an
    unmodified copy of the target (so downstream results are bit-identical
    to no adaptation at all).
    """
    source_slice = np.asarray(source_slice)
    target_slice = np.asarray(target_slice)
    if source_slice.shape != target_slice.shape:
        raise ShapeMismatchError(
            f"source slice shape {source_slice.shape} != target slice shape {target_slice.shape}"
        )
    if beta == 0.0:
        return target_slice.copy()
    h, w = target_slice.shape
    mask = circular_mask(h, w, beta)
    swapped = swap_amplitudes(decompose(source_slice), decompose(target_slice), mask)
    return np.clip(recompose(swapped), 0.0, 1.0)


def _predict(predictor, plane: np.ndarray, index: int) -> np.ndarray:
    try:
        out = predictor.predict(plane, index)
    except KswapError:
        raise
    except Exception as exc:
        raise KswapError(f"predictor '{predictor.name}' failed on slice {index}: {exc}") from exc
    out = np.asarray(out)
    if out.shape != plane.shape:
        raise KswapError(
            f"predictor '{predictor.name}' returned shape {out.shape} for slice {index}, "
            f"expected {plane.shape}"
        )
    return out


def multi_source_transfer(target: Volume, sources: ScanCollection, donors,
                          cfg: TransferConfig, predictor) -> Volume:
    """Adapt each target slice with its donors and average the predictions.

    For target slice i and donor list [d1..dk] the output plane is
    mean_j predictor(fda_swap(d_j, t_i, beta)), summed in donor-list order
    so results are bit-deterministic. When a slice has k != n_mst donors the
    mean is over k and a warning is logged.
    """
    target.validate()
    if len(donors.per_slice) != target.n_slices:
        raise KswapError(
            f"donor assignment covers {len(donors.per_slice)} slices, "
            f"target '{target.id}' has {target.n_slices}"
        )
    if any(len(refs) == 0 for refs in donors.per_slice):
        raise KswapError("every target slice needs at least one donor")
    short = [i for i, refs in enumerate(donors.per_slice) if len(refs) != cfg.n_mst]
    if short:
        logger.warning(
            "target '%s': %d slice(s) have a donor count != n_mst=%d (e.g. slice %d)",
            target.id, len(short), cfg.n_mst, short[0],
        )
    by_id = {s.id: s for s in sources.scans}
    out = np.empty(target.shape, dtype=np.float64)
    for i, refs in enumerate(donors.per_slice):
        acc = np.zeros(target.shape[1:], dtype=np.float64)
        for ref in refs:
            donor_scan = by_id.get(ref.scan_id)
            if donor_scan is None:
                raise KswapError(f"donor scan '{ref.scan_id}' not in source collection")
            donor_plane = donor_scan.data[ref.slice_index]
            adapted = fda_swap(donor_plane, target.data[i], cfg.beta)
            acc += _predict(predictor, adapted, i)
        out[i] = acc / len(refs)
    return Volume(data=out.astype(np.float32), spacing=target.spacing,
                  id=target.id, domain=target.domain, kind="probability")


def naive_predict(target: Volume, predictor) -> Volume:
    """Run the predictor slice by slice with no spectral modification."""
    target.validate()
    out = np.empty(target.shape, dtype=np.float64)
    for i in range(target.n_slices):
        out[i] = _predict(predictor, target.data[i], i)
    return Volume(data=out.astype(np.float32), spacing=target.spacing,
                  id=target.id, domain=target.domain, kind="probability")
