"""Pan image adjustment: histogram matching and virtual-band correction.

The virtual band ``V`` closes the energy balance ``W . S + V = P`` between the
multispectral bands and the panchromatic band. Weights are fitted on the
coarse grid under ``0 <= w_k <= 1``, the residual ``V_lr`` is interpolated to
the Pan grid and subtracted from the Pan image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bvls import BvlsSolution, bvls_solve
from .raster import DimensionError, as_multiband, as_raster, as_weights, intensity, stats
from .resample import FilterSpec, pan_to_low, upsample_bicubic, upsample_image

DEFAULT_BINS = 65536

PHM_KINDS = ("none", "full", "simple")
PHM_SCALES = ("low", "high")


@dataclass(frozen=True)
class AdjustmentMode:
    """Pan histogram matching (``phm``) at ``phm_scale`` and/or Pan correction (``pc``)."""

    phm: str = "none"
    phm_scale: str = "low"
    pc: bool = False

    def __post_init__(self):
        if self.phm not in PHM_KINDS:
            raise ValueError(f"phm must be one of {PHM_KINDS}, got {self.phm!r}")
        if self.phm_scale not in PHM_SCALES:
            raise ValueError(f"phm_scale must be one of {PHM_SCALES}, got {self.phm_scale!r}")

    @property
    def label(self) -> str:
        parts = []
        if self.phm != "none":
            parts.append(f"PHM, {self.phm}, {self.phm_scale}")
        if self.pc:
            parts.append("PC")
        return " + ".join(parts) if parts else "Before correction"


@dataclass(frozen=True)
class PanCorrectionResult:
    corrected_pan: np.ndarray
    weights: np.ndarray
    virtual_low: np.ndarray
    virtual_high: np.ndarray
    # Pan after optional histogram matching, i.e. the input to the correction.
    matched_pan: np.ndarray
    solution: BvlsSolution | None = None


def match_histogram_simple(src, target) -> np.ndarray:
    """Match mean and standard deviation of ``src`` to those of ``target``."""
    src = np.asarray(src, dtype=np.float64)
    mu_s, sd_s = stats(src)
    mu_t, sd_t = stats(target)
    if sd_s == 0.0:
        raise ValueError("source has zero standard deviation; gain is undefined")
    return (src - mu_s) * (sd_t / sd_s) + mu_t


def match_histogram_full(src, target, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Monotone quantile mapping of ``src`` onto the distribution of ``target``.

    Each cumulative histogram uses ``bins`` equal bins over its own value
    range (never wider than the joint range) and is linear inside each bin, so
    an affine relation between ``src`` and ``target`` is reproduced exactly up
    to sample ties. ``src`` and ``target`` may differ in size (e.g. a Pan band
    and a coarse intensity image).
    """
    if bins < 2:
        raise ValueError("bins must be at least 2")
    src = np.asarray(src, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64).ravel()
    if src.size == 0 or target.size == 0:
        raise ValueError("histogram matching needs non-empty inputs")
    t_min, t_max = float(target.min()), float(target.max())
    if t_min == t_max:
        return np.full(src.shape, t_min)

    edges = np.linspace(t_min, t_max, bins + 1)
    h_tgt = np.histogram(target, bins=edges)[0]
    cdf_tgt = np.concatenate(([0.0], np.cumsum(h_tgt))) / target.size

    s_min, s_max = float(src.min()), float(src.max())
    if s_min == s_max:
        # A constant source maps to the target median.
        level = np.full(src.size, 0.5)
    else:
        s_edges = np.linspace(s_min, s_max, bins + 1)
        h_src = np.histogram(src, bins=s_edges)[0]
        cdf_src = np.concatenate(([0.0], np.cumsum(h_src))) / src.size
        level = np.interp(src.ravel(), s_edges, cdf_src)

    # Invert the target CDF over its occupied bins only; together they tile [0, 1].
    occupied = np.flatnonzero(h_tgt)
    c0 = cdf_tgt[occupied]
    c1 = cdf_tgt[occupied + 1]
    e0 = edges[occupied]
    e1 = edges[occupied + 1]
    k = np.minimum(np.searchsorted(c1, level, side="left"), occupied.size - 1)
    frac = np.clip((level - c0[k]) / (c1[k] - c0[k]), 0.0, 1.0)
    out = e0[k] + frac * (e1[k] - e0[k])
    return out.reshape(src.shape)


def estimate_weights(ms_lr, pan_lr, return_solution: bool = False, **solver_kw):
    """Fit band weights in ``[0, 1]`` so that ``sum_k w_k S_k`` best matches ``pan_lr``."""
    ms_lr = as_multiband(ms_lr, "ms")
    pan_lr = as_raster(pan_lr, "pan")
    if pan_lr.shape != ms_lr.shape[1:]:
        raise DimensionError(f"pan shape {pan_lr.shape} differs from MS shape {ms_lr.shape[1:]}")
    design = ms_lr.reshape(ms_lr.shape[0], -1).T
    sol = bvls_solve(design, pan_lr.ravel(), 0.0, 1.0, **solver_kw)
    if return_solution:
        return sol.weights, sol
    return sol.weights


def compute_virtual_band(pan_lr, ms_lr, w) -> np.ndarray:
    """Energy-balance residual ``V_lr = P_lr - W . S_lr``."""
    pan_lr = as_raster(pan_lr, "pan")
    ms_lr = as_multiband(ms_lr, "ms")
    if pan_lr.shape != ms_lr.shape[1:]:
        raise DimensionError(f"pan shape {pan_lr.shape} differs from MS shape {ms_lr.shape[1:]}")
    return pan_lr - intensity(ms_lr, w)


def correct_pan(pan_hr, v_lr, ratio: int) -> tuple[np.ndarray, np.ndarray]:
    """Subtract the up-sampled virtual band; returns ``(corrected, virtual_high)``."""
    pan_hr = as_raster(pan_hr, "pan")
    v_lr = as_raster(v_lr, "virtual band")
    expected = (v_lr.shape[0] * ratio, v_lr.shape[1] * ratio)
    if pan_hr.shape != expected:
        raise DimensionError(f"pan shape {pan_hr.shape} does not equal virtual band shape x{ratio} = {expected}")
    v_hr = upsample_bicubic(v_lr, ratio)
    return pan_hr - v_hr, v_hr


def check_ratio(pan_hr: np.ndarray, ms_lr: np.ndarray, ratio: int) -> None:
    expected = (ms_lr.shape[1] * ratio, ms_lr.shape[2] * ratio)
    if pan_hr.shape != expected:
        raise DimensionError(
            f"pan shape {pan_hr.shape} is not MS shape {ms_lr.shape[1:]} x ratio {ratio}")


def match_pan(pan_hr, ms_lr, mode: AdjustmentMode, ratio: int, w0, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Histogram-match the Pan band to the provider-weight intensity."""
    pan_hr = as_raster(pan_hr, "pan")
    if mode.phm == "none":
        return pan_hr.copy()
    if mode.phm_scale == "low":
        reference = intensity(ms_lr, w0)
    else:
        reference = intensity(upsample_image(ms_lr, ratio), w0)
    if mode.phm == "full":
        return match_histogram_full(pan_hr, reference, bins)
    return match_histogram_simple(pan_hr, reference)


def adjust_pan(pan_hr, ms_lr, mode: AdjustmentMode, spec: FilterSpec, w0,
               bins: int = DEFAULT_BINS) -> PanCorrectionResult:
    """Histogram matching (optional) followed by virtual-band correction (optional).

    ``w0`` is only used to build the histogram-matching reference; the
    correction fits its own weights. With ``mode.pc`` off the result carries
    ``w0`` and zero virtual bands.
    """
    pan_hr = as_raster(pan_hr, "pan")
    ms_lr = as_multiband(ms_lr, "ms")
    w0 = as_weights(w0, ms_lr.shape[0])
    check_ratio(pan_hr, ms_lr, spec.ratio)

    matched = match_pan(pan_hr, ms_lr, mode, spec.ratio, w0, bins)
    if not mode.pc:
        return PanCorrectionResult(
            corrected_pan=matched,
            weights=w0.copy(),
            virtual_low=np.zeros(ms_lr.shape[1:]),
            virtual_high=np.zeros(pan_hr.shape),
            matched_pan=matched,
        )

    pan_lr = pan_to_low(matched, spec)
    w_hat, sol = estimate_weights(ms_lr, pan_lr, return_solution=True)
    v_lr = compute_virtual_band(pan_lr, ms_lr, w_hat)
    corrected, v_hr = correct_pan(matched, v_lr, spec.ratio)
    return PanCorrectionResult(
        corrected_pan=corrected,
        weights=w_hat,
        virtual_low=v_lr,
        virtual_high=v_hr,
        matched_pan=matched,
        solution=sol,
    )
