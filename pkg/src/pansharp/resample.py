"""Bicubic up-sampling, low-pass filtering, decimation and Wald degradation.

Grid convention: sample ``(y, x)`` of a low-resolution raster sits on sample
``(ratio * y, ratio * x)`` of the high-resolution grid (phase zero). Every
resampling routine here follows it so that up- and down-sampling compose
without a sub-pixel shift.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .raster import DimensionError, as_multiband, as_raster

BICUBIC_A = -0.5


@dataclass(frozen=True)
class FilterSpec:
    """Low-pass filter and resolution ratio.

    ``cutoff`` is in cycles/sample on the input grid; ``None`` selects
    ``0.5 / ratio`` (the -3 dB point at the target Nyquist frequency).
    """

    kind: str = "butterworth"
    ratio: int = 2
    cutoff: float | None = None
    order: int = 5

    def __post_init__(self):
        if self.kind not in ("butterworth", "boxcar"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if int(self.ratio) != self.ratio or self.ratio < 1:
            raise ValueError("ratio must be a positive integer")
        if self.cutoff is not None and not 0.0 < self.cutoff <= 0.5:
            raise ValueError("cutoff must lie in (0, 0.5]")
        if int(self.order) != self.order or self.order < 1:
            raise ValueError("order must be a positive integer")

    @property
    def effective_cutoff(self) -> float:
        return self.cutoff if self.cutoff is not None else 0.5 / self.ratio

    def with_ratio(self, ratio: int) -> "FilterSpec":
        return replace(self, ratio=ratio)


def cubic_kernel(t, a: float = BICUBIC_A) -> np.ndarray:
    """Keys cubic convolution kernel."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    t2 = t * t
    t3 = t2 * t
    near = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0
    far = a * t3 - 5.0 * a * t2 + 8.0 * a * t - 4.0 * a
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def _interp_matrix(n_in: int, ratio: int) -> np.ndarray:
    """Dense ``(n_in * ratio, n_in)`` cubic-convolution operator for one axis."""
    n_out = n_in * ratio
    pos = np.arange(n_out) // ratio
    frac = (np.arange(n_out) % ratio) / ratio
    mat = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for offset in (-1, 0, 1, 2):
        w = cubic_kernel(frac - offset)
        cols = np.clip(pos + offset, 0, n_in - 1)
        np.add.at(mat, (rows, cols), w)
    return mat


def upsample_bicubic(r, ratio: int) -> np.ndarray:
    """Cubic-convolution up-sampling by an integer ``ratio``, clamp-to-edge."""
    if int(ratio) != ratio or ratio < 1:
        raise ValueError("ratio must be a positive integer")
    r = as_raster(r)
    if ratio == 1:
        return r.copy()
    my = _interp_matrix(r.shape[0], ratio)
    mx = _interp_matrix(r.shape[1], ratio)
    return my @ r @ mx.T


def upsample_image(ms, ratio: int) -> np.ndarray:
    ms = as_multiband(ms)
    return np.stack([upsample_bicubic(band, ratio) for band in ms])


def butterworth_response(shape: tuple[int, int], cutoff: float, order: int) -> np.ndarray:
    """Zero-phase amplitude response ``1 / sqrt(1 + (f / cutoff)^(2 order))``.

    ``f`` is the radial frequency (cycles/sample) of each bin in ``fft2`` order.
    """
    fy = np.fft.fftfreq(shape[0])[:, np.newaxis]
    fx = np.fft.fftfreq(shape[1])[np.newaxis, :]
    f2 = (fy * fy + fx * fx) / (cutoff * cutoff)
    return 1.0 / np.sqrt(1.0 + f2 ** order)


def fourier_filter(r: np.ndarray, response: np.ndarray) -> np.ndarray:
    """Apply a real frequency response to ``r`` with periodic boundaries."""
    return np.real(np.fft.ifft2(np.fft.fft2(r) * response))


def butterworth_lowpass(r, cutoff: float, order: int, pad: int = 0) -> np.ndarray:
    """Butterworth low-pass; ``pad`` pixels of edge-mirror padding per side."""
    r = as_raster(r)
    mean = r.mean()
    work = r - mean
    if pad > 0:
        work = np.pad(work, pad, mode="reflect")
    out = fourier_filter(work, butterworth_response(work.shape, cutoff, order))
    if pad > 0:
        out = out[pad:-pad, pad:-pad]
    # DC passes unchanged; removing it first keeps constants exact.
    return out + mean


def boxcar_lowpass(r, ratio: int) -> np.ndarray:
    """Replace every ``ratio x ratio`` block by its mean (edge blocks may be partial)."""
    r = as_raster(r)
    if ratio == 1:
        return r.copy()
    h, w = r.shape
    out = np.empty_like(r)
    for y0 in range(0, h, ratio):
        for x0 in range(0, w, ratio):
            block = r[y0:y0 + ratio, x0:x0 + ratio]
            out[y0:y0 + ratio, x0:x0 + ratio] = block.mean()
    return out


def lowpass(r, spec: FilterSpec) -> np.ndarray:
    """Low-pass ``r`` on its own grid; output shape equals input shape."""
    if spec.kind == "boxcar":
        return boxcar_lowpass(r, spec.ratio)
    return butterworth_lowpass(r, spec.effective_cutoff, spec.order, pad=4 * spec.ratio)


def decimate(r, ratio: int) -> np.ndarray:
    """Keep samples at ``(ratio * y, ratio * x)``."""
    r = as_raster(r)
    if r.shape[0] % ratio or r.shape[1] % ratio:
        raise DimensionError(f"shape {r.shape} is not divisible by ratio {ratio}")
    return r[::ratio, ::ratio].copy()


def pan_to_low(p_hr, spec: FilterSpec) -> np.ndarray:
    """Filter then decimate a high-resolution band onto the coarse grid."""
    p_hr = as_raster(p_hr, "pan")
    if p_hr.shape[0] % spec.ratio or p_hr.shape[1] % spec.ratio:
        raise DimensionError(f"shape {p_hr.shape} is not divisible by ratio {spec.ratio}")
    return decimate(lowpass(p_hr, spec), spec.ratio)


def degrade_image(ms, spec: FilterSpec) -> np.ndarray:
    ms = as_multiband(ms)
    return np.stack([pan_to_low(band, spec) for band in ms])


def degrade_wald(ms, pan, spec_ms: FilterSpec, spec_pan: FilterSpec) -> tuple[np.ndarray, np.ndarray]:
    """Reduced-resolution inputs for reference-based evaluation.

    Returns ``(ms_lr, pan_lr)``; the untouched ``ms`` then acts as reference.
    """
    return degrade_image(ms, spec_ms), pan_to_low(pan, spec_pan)
