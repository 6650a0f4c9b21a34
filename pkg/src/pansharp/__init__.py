"""Model-based Pan adjustment and pansharpening with reduced-resolution evaluation."""

from .adjust import (AdjustmentMode, PanCorrectionResult, adjust_pan, compute_virtual_band, correct_pan,
                     estimate_weights, match_histogram_full, match_histogram_simple)
from .bvls import BvlsConvergenceError, BvlsSolution, bvls_solve
from .fusion import (FusionConfig, WorkflowReport, fuse_cs, fuse_hpf, fuse_msi, match_ms_after_fusion,
                     run_workflow)
from .quality import RmseReport, rmse_band, rmse_image
from .raster import DimensionError, intensity, pixelwise_combine, stats
from .resample import FilterSpec, decimate, degrade_wald, lowpass, pan_to_low, upsample_bicubic

__version__ = "0.1.0"

__all__ = [
    "AdjustmentMode", "PanCorrectionResult", "adjust_pan", "compute_virtual_band", "correct_pan",
    "estimate_weights", "match_histogram_full", "match_histogram_simple",
    "BvlsConvergenceError", "BvlsSolution", "bvls_solve",
    "FusionConfig", "WorkflowReport", "fuse_cs", "fuse_hpf", "fuse_msi", "match_ms_after_fusion", "run_workflow",
    "RmseReport", "rmse_band", "rmse_image",
    "DimensionError", "intensity", "pixelwise_combine", "stats",
    "FilterSpec", "decimate", "degrade_wald", "lowpass", "pan_to_low", "upsample_bicubic",
]
