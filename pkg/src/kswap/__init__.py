"""Training-free k-space style adaptation toolkit for volumetric scans."""

from .betasearch import (BetaCurve, DEFAULT_BETA_GRID, averaged_optimal,
                         evaluate_pair_at_beta, grid_search, optimal_per_pair)
from .donors import (DonorAssignment, DonorRef, SliceScoreCache,
                     random_assignment, select_25d, select_2d, select_3d,
                     select_donors)
from .errors import KswapError, ShapeMismatchError, VolumeError
from .metrics import SurfaceDiceParams, boundary_mask, dice, surface_dice
from .phantom import (DomainParams, SEVERITY_TABLES, generate_benchmark,
                      generate_scan)
from .predict import (BaselineSegmenter, BaselineSegmenterParams,
                      PrecomputedPredictor, Predictor, baseline_predict,
                      precomputed_predict)
from .spectrum import (MaskPlane, SliceSpectrum, circular_mask, decompose,
                       mask_radius, recompose)
from .srsim import (SrsimParams, scan_similarity_3d,
                    spectral_residual_saliency, srsim)
from .transfer import (TransferConfig, fda_swap, multi_source_transfer,
                       naive_predict, swap_amplitudes)
from .volume import (ScanCollection, Volume, binarize_probability,
                     load_collection, load_volume, minmax_normalize,
                     save_volume)

__version__ = "0.1.0"

__all__ = [
    "BaselineSegmenter", "BaselineSegmenterParams", "BetaCurve",
    "DEFAULT_BETA_GRID", "DomainParams", "DonorAssignment", "DonorRef",
    "KswapError", "MaskPlane", "PrecomputedPredictor", "Predictor",
    "ScanCollection", "SEVERITY_TABLES", "ShapeMismatchError",
    "SliceScoreCache", "SliceSpectrum", "SrsimParams", "SurfaceDiceParams",
    "TransferConfig", "Volume", "VolumeError", "averaged_optimal",
    "baseline_predict", "binarize_probability", "boundary_mask",
    "circular_mask", "decompose", "dice", "evaluate_pair_at_beta",
    "fda_swap", "generate_benchmark", "generate_scan", "grid_search",
    "load_collection", "load_volume", "mask_radius", "minmax_normalize",
    "multi_source_transfer", "naive_predict", "optimal_per_pair",
    "precomputed_predict", "random_assignment", "recompose",
    "save_volume", "scan_similarity_3d", "select_25d", "select_2d",
    "select_3d", "select_donors", "spectral_residual_saliency", "srsim",
    "surface_dice", "swap_amplitudes",
]
