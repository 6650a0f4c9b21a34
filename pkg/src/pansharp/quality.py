"""Reference-based quality measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import DimensionError, as_multiband


@dataclass(frozen=True)
class RmseReport:
    per_band: tuple[float, ...]
    mean: float
    pan_rmse: float | None = None


def rmse_band(a, b) -> float:
    """Root mean squared difference over all pixels of two bands."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.sqrt(np.mean(d * d)))


def rmse_image(a, b, pan_rmse: float | None = None) -> RmseReport:
    """Per-band RMSE and their arithmetic mean."""
    a = as_multiband(a)
    b = as_multiband(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    per_band = tuple(rmse_band(x, y) for x, y in zip(a, b))
    return RmseReport(per_band=per_band, mean=sum(per_band) / len(per_band), pan_rmse=pan_rmse)
