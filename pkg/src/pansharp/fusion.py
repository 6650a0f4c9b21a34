"""Component-substitution and high-pass-filter pansharpening.

``cs_a`` / ``cs_m`` inject ``P - I`` (additive) or ``P / I`` (multiplicative)
where ``I`` is the weighted intensity of the up-sampled MS image. ``hpf_a`` /
``hpf_m`` use the Butterworth low-passed Pan in place of ``I``. ``msi`` is
plain bicubic interpolation and ignores the Pan band.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .adjust import DEFAULT_BINS, AdjustmentMode, adjust_pan, check_ratio, estimate_weights, match_histogram_full
from .quality import RmseReport, rmse_band, rmse_image
from .raster import DimensionError, as_multiband, as_raster, as_weights, intensity, safe_divide
from .resample import FilterSpec, lowpass, pan_to_low, upsample_image

logger = logging.getLogger(__name__)

METHODS = ("cs_a", "cs_m", "hpf_a", "hpf_m", "msi")
WEIGHT_SOURCES = ("provider", "estimated_low", "estimated_high")
_WEIGHT_LABELS = {"provider": "W_0", "estimated_low": "W_low", "estimated_high": "W_high"}


@dataclass(frozen=True)
class FusionConfig:
    """One pansharpening run.

    ``epsilon`` is the safe-divide floor as a fraction of the Pan dynamic
    range. ``literal_multiplicative`` switches the multiplicative variants to
    ``S + P / I`` instead of ``S * (P / I)``.
    """

    method: str = "cs_m"
    adjustment: AdjustmentMode = field(default_factory=lambda: AdjustmentMode(pc=True))
    weight_source: str = "estimated_low"
    mhm: bool = True
    filter: FilterSpec = field(default_factory=FilterSpec)
    epsilon: float = 1e-6
    bins: int = DEFAULT_BINS
    literal_multiplicative: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.weight_source not in WEIGHT_SOURCES:
            raise ValueError(f"weight_source must be one of {WEIGHT_SOURCES}, got {self.weight_source!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def label(self) -> str:
        """Row label in the style of the comparison tables, e.g. ``PC + W_low + MHM``."""
        if self.method == "msi":
            return "MSI"
        parts = [self.adjustment.label]
        if self.weight_source != "provider":
            parts.append(_WEIGHT_LABELS[self.weight_source])
        if self.mhm:
            parts.append("MHM")
        return " + ".join(parts)


@dataclass
class WorkflowReport:
    label: str
    method: str
    weights: np.ndarray
    # RMSE between the fusion intensity and the adjusted Pan on both grids;
    # pan_rmse_high uses the reference MS when one is supplied.
    pan_rmse_high: float | None
    pan_rmse_low: float
    pan_rmse_interp: float
    rmse: RmseReport | None = None
    warnings: list[str] = field(default_factory=list)

    def csv_header(self) -> list[str]:
        n = len(self.rmse.per_band) if self.rmse else 0
        return ["mode", "method"] + [f"band_{k + 1}" for k in range(n)] + ["mean"]

    def csv_row(self) -> list[str]:
        values = list(self.rmse.per_band) + [self.rmse.mean] if self.rmse else [float("nan")]
        return [self.label, self.method] + [format_value(v) for v in values]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.csv_header())
        writer.writerow(self.csv_row())
        return buf.getvalue()


def format_value(v: float) -> str:
    return f"{v:.6f}"


def _same_grid(ms_up: np.ndarray, *rasters: np.ndarray) -> None:
    for r in rasters:
        if r.shape != ms_up.shape[1:]:
            raise DimensionError(f"raster shape {r.shape} differs from MS grid {ms_up.shape[1:]}")


def _inject(ms_up, detail_num, detail_den, variant, epsilon, literal):
    if variant == "additive":
        return ms_up + (detail_num - detail_den)[np.newaxis]
    if variant != "multiplicative":
        raise ValueError(f"variant must be 'additive' or 'multiplicative', got {variant!r}")
    ratio = safe_divide(detail_num, detail_den, epsilon)
    if literal:
        return ms_up + ratio[np.newaxis]
    return ms_up * ratio[np.newaxis]


def fuse_cs(ms_up, pan, intensity_hr, variant: str, epsilon: float = 1e-6,
            literal: bool = False) -> np.ndarray:
    """Component substitution: inject ``pan - I`` or scale by ``pan / I``."""
    ms_up = as_multiband(ms_up, "ms")
    pan = as_raster(pan, "pan")
    intensity_hr = as_raster(intensity_hr, "intensity")
    _same_grid(ms_up, pan, intensity_hr)
    return _inject(ms_up, pan, intensity_hr, variant, epsilon, literal)


def fuse_hpf(ms_up, pan, pan_low, variant: str, epsilon: float = 1e-6,
             literal: bool = False) -> np.ndarray:
    """High-pass filter fusion: inject ``pan - lowpass(pan)`` or scale by their ratio."""
    ms_up = as_multiband(ms_up, "ms")
    pan = as_raster(pan, "pan")
    pan_low = as_raster(pan_low, "low-passed pan")
    _same_grid(ms_up, pan, pan_low)
    return _inject(ms_up, pan, pan_low, variant, epsilon, literal)


def fuse_msi(ms_lr, ratio: int) -> np.ndarray:
    return upsample_image(ms_lr, ratio)


def match_ms_after_fusion(fused, ms_lr, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Match every fused band to the histogram of its low-resolution input band."""
    fused = as_multiband(fused, "fused")
    ms_lr = as_multiband(ms_lr, "ms")
    if fused.shape[0] != ms_lr.shape[0]:
        raise DimensionError(f"band count mismatch: {fused.shape[0]} vs {ms_lr.shape[0]}")
    return np.stack([match_histogram_full(f, m, bins) for f, m in zip(fused, ms_lr)])


def run_workflow(ms_lr, pan_hr, config: FusionConfig, w0, reference=None):
    """Up-sample, adjust Pan, fit weights, fuse and optionally match histograms.

    Parameters
    ----------
    ms_lr : array_like, shape (K, h, w)
    pan_hr : array_like, shape (h * ratio, w * ratio)
    config : FusionConfig
    w0 : array_like, shape (K,)
        Provider weights; used for histogram matching and ``weight_source="provider"``.
    reference : array_like, shape (K, h * ratio, w * ratio), optional
        Ground-truth MS for reduced-resolution evaluation.

    Returns
    -------
    (fused, WorkflowReport)
    """
    ms_lr = as_multiband(ms_lr, "ms")
    pan_hr = as_raster(pan_hr, "pan")
    w0 = as_weights(w0, ms_lr.shape[0])
    spec = config.filter
    ratio = spec.ratio
    check_ratio(pan_hr, ms_lr, ratio)
    if reference is not None:
        reference = as_multiband(reference, "reference")
        if reference.shape != (ms_lr.shape[0],) + pan_hr.shape:
            raise DimensionError(f"reference shape {reference.shape} does not match the fused grid")

    ms_up = upsample_image(ms_lr, ratio)
    warnings = []

    if config.method == "msi":
        adjusted_pan = pan_hr
        weights = w0
        fused = ms_up
        if config.adjustment != AdjustmentMode() or config.mhm or config.weight_source != "provider":
            msg = "corrections do not apply to msi and were ignored"
            logger.warning(msg)
            warnings.append(msg)
    else:
        adj = adjust_pan(pan_hr, ms_lr, config.adjustment, spec, w0, config.bins)
        adjusted_pan = adj.corrected_pan
        if config.weight_source == "provider":
            weights = w0
        elif config.weight_source == "estimated_low":
            if config.adjustment.pc:
                weights = adj.weights
            else:
                weights = estimate_weights(ms_lr, pan_to_low(adj.matched_pan, spec))
        else:
            weights = estimate_weights(ms_up, adjusted_pan)

        i_hr = intensity(ms_up, weights)
        span = float(adjusted_pan.max() - adjusted_pan.min())
        eps = config.epsilon * span if span > 0 else config.epsilon
        variant = "additive" if config.method.endswith("_a") else "multiplicative"
        if config.method.startswith("cs"):
            fused = fuse_cs(ms_up, adjusted_pan, i_hr, variant, eps, config.literal_multiplicative)
        else:
            fused = fuse_hpf(ms_up, adjusted_pan, lowpass(adjusted_pan, spec), variant, eps,
                             config.literal_multiplicative)
        if config.mhm:
            fused = match_ms_after_fusion(fused, ms_lr, config.bins)

    pan_rmse_interp = rmse_band(intensity(ms_up, weights), adjusted_pan)
    pan_rmse_low = rmse_band(intensity(ms_lr, weights), pan_to_low(adjusted_pan, spec))
    pan_rmse_high = None
    rmse = None
    if reference is not None:
        pan_rmse_high = rmse_band(intensity(reference, weights), adjusted_pan)
        rmse = rmse_image(fused, reference, pan_rmse=pan_rmse_high)

    report = WorkflowReport(
        label=config.label,
        method=config.method,
        weights=np.asarray(weights, dtype=np.float64).copy(),
        pan_rmse_high=pan_rmse_high,
        pan_rmse_low=pan_rmse_low,
        pan_rmse_interp=pan_rmse_interp,
        rmse=rmse,
        warnings=warnings,
    )
    return fused, report
