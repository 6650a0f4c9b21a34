"""Seeded synthetic scenes for reduced-resolution experiments.

A fine-grid scene is built from a shared shading field times a mixture of
material spectra. The Pan sensor sees a gained weighted band sum, detail from
outside the MS spectral range, a smooth virtual band and noise. The MS sensor
sees the fine scene low-passed and decimated by the original Pan/MS ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import intensity
from .resample import FilterSpec, degrade_image, degrade_wald

# WorldView-2 provider weights for its eight MS bands.
WV2_PROVIDER_WEIGHTS = np.array(
    [0.0074, 0.1106, 0.1787, 0.12076, 0.1987, 0.1363, 0.0959, 0.0002793])


def random_field(shape, rng: np.random.Generator, slope: float = 1.0,
                 max_freq: float | None = None, min_freq: float = 0.0) -> np.ndarray:
    """Zero-mean, unit-variance Gaussian field with amplitude spectrum ``f**-slope``.

    Frequencies (cycles/sample) above ``max_freq`` or below ``min_freq`` are
    removed, so ``max_freq`` gives an exactly band-limited field.
    """
    noise = rng.standard_normal(shape)
    fy = np.fft.fftfreq(shape[0])[:, np.newaxis]
    fx = np.fft.fftfreq(shape[1])[np.newaxis, :]
    f = np.hypot(fy, fx)
    amp = np.zeros_like(f)
    nz = f > 0
    amp[nz] = f[nz] ** -slope
    if max_freq is not None:
        amp[f > max_freq] = 0.0
    amp[f < min_freq] = 0.0
    field = np.real(np.fft.ifft2(np.fft.fft2(noise) * amp))
    field -= field.mean()
    sd = field.std()
    return field / sd if sd > 0 else field


@dataclass(frozen=True)
class SyntheticScene:
    ms: np.ndarray
    pan: np.ndarray
    provider_weights: np.ndarray
    true_weights: np.ndarray
    pan_gain: float
    pan_ratio: int


def make_scene(seed: int, size: int = 128, pan_ratio: int = 4, n_bands: int = 8,
               n_materials: int = 5, pan_gain: float = 1.15, virtual_level: float = 0.2,
               hidden_level: float = 0.25, shading_level: float = 0.4, noise_level: float = 0.005,
               provider_weights=None) -> SyntheticScene:
    """Generate an original-resolution MS/Pan pair.

    ``virtual_level`` scales the smooth virtual band and ``hidden_level`` the
    scene-dependent Pan response outside the MS bands, both relative to the
    standard deviation of the true Pan intensity. ``pan_gain`` is the
    radiometric gain of the Pan sensor relative to the MS bands, and
    ``shading_level`` the contrast of the illumination field shared by all bands.
    """
    rng = np.random.default_rng(seed)
    if provider_weights is None:
        if n_bands == WV2_PROVIDER_WEIGHTS.size:
            provider_weights = WV2_PROVIDER_WEIGHTS
        else:
            provider_weights = np.full(n_bands, 1.0 / n_bands)
    provider_weights = np.asarray(provider_weights, dtype=np.float64)

    fine = (size * pan_ratio, size * pan_ratio)
    shading = np.clip(1.0 + shading_level * random_field(fine, rng, slope=1.0), 0.2, None)
    logits = np.stack([3.0 * random_field(fine, rng, slope=1.3) for _ in range(n_materials)])
    logits -= logits.max(axis=0)
    abundance = np.exp(logits)
    abundance /= abundance.sum(axis=0)
    spectra = rng.uniform(30.0, 250.0, size=(n_materials, n_bands))
    reflect = np.tensordot(spectra.T, abundance, axes=1)
    texture = np.stack([1.0 + 0.03 * random_field(fine, rng, slope=1.0) for _ in range(n_bands)])
    scene = shading[np.newaxis] * reflect * texture

    true_weights = np.clip(provider_weights * rng.uniform(0.6, 1.4, n_bands), 0.0, 1.0)
    clean = intensity(scene, true_weights)
    spread = clean.std()
    # Pan response outside the MS bands: scene detail the MS sensor cannot see.
    hidden = hidden_level * spread * shading * random_field(fine, rng, slope=1.0)
    virtual = virtual_level * spread * (1.0 + random_field(fine, rng, slope=2.0, max_freq=4.0 / fine[0]))
    noise = noise_level * spread * rng.standard_normal(fine)
    pan = pan_gain * (clean + hidden) + virtual + noise

    ms = degrade_image(scene, FilterSpec(ratio=pan_ratio))
    return SyntheticScene(
        ms=ms,
        pan=pan,
        provider_weights=provider_weights.copy(),
        true_weights=true_weights,
        pan_gain=pan_gain,
        pan_ratio=pan_ratio,
    )


@dataclass(frozen=True)
class WaldSetup:
    ms_lr: np.ndarray
    pan_hr: np.ndarray
    reference: np.ndarray
    spec: FilterSpec


def wald_setup(ms, pan, ratio: int = 2, spec: FilterSpec | None = None) -> WaldSetup:
    """Reduced-resolution inputs: MS degraded by ``ratio``, Pan onto the original MS grid.

    ``spec`` is the fusion filter template; its ratio is overridden.
    """
    spec = (spec or FilterSpec()).with_ratio(ratio)
    pan_ratio = pan.shape[0] // ms.shape[1]
    if pan.shape != (ms.shape[1] * pan_ratio, ms.shape[2] * pan_ratio):
        raise ValueError(f"pan shape {pan.shape} is not an integer multiple of MS shape {ms.shape[1:]}")
    ms_lr, pan_lr = degrade_wald(ms, pan, spec, spec.with_ratio(pan_ratio))
    return WaldSetup(ms_lr=ms_lr, pan_hr=pan_lr, reference=np.asarray(ms, dtype=np.float64), spec=spec)
