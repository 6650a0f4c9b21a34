"""Image containers and pixelwise arithmetic.

A raster is a 2-D ``float64`` array indexed ``[row, col]`` (row-major, top-left
origin). A multiband image is a 3-D array shaped ``(bands, rows, cols)``.
Spectral weights are a 1-D array with one entry per band, each in ``[0, 1]``.
"""

from __future__ import annotations

import numpy as np


class DimensionError(ValueError):
    """Raised when image or vector shapes are incompatible."""


def as_raster(data, name: str = "raster") -> np.ndarray:
    """Validate ``data`` as a single band and return it as ``float64``."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    return arr


def as_multiband(data, name: str = "image") -> np.ndarray:
    """Validate ``data`` as a ``(bands, rows, cols)`` stack.

    A 2-D input is promoted to a single-band stack.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3 or arr.size == 0:
        raise DimensionError(f"{name} must be a non-empty (bands, rows, cols) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    return arr


def as_weights(w, n_bands: int | None = None) -> np.ndarray:
    """Validate a spectral weight vector (``0 <= w_k <= 1``)."""
    arr = np.asarray(w, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise DimensionError("weight vector is empty")
    if n_bands is not None and arr.size != n_bands:
        raise DimensionError(f"weight vector has length {arr.size}, expected {n_bands}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("weights contain non-finite values")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("weights must lie in [0, 1]")
    return arr


def equal_weights(n_bands: int) -> np.ndarray:
    """Uniform weights ``1/K``, the fallback when provider weights are unknown."""
    return np.full(n_bands, 1.0 / n_bands)


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def intensity(ms, w) -> np.ndarray:
    """Weighted band sum ``sum_k w_k * ms[k]``.

    Weights outside ``[0, 1]`` are accepted here so that linear combinations
    of weight vectors can be evaluated; only the length is enforced.
    """
    ms = as_multiband(ms, "ms")
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.size != ms.shape[0]:
        raise DimensionError(f"weight vector has length {w.size}, image has {ms.shape[0]} bands")
    out = np.zeros(ms.shape[1:], dtype=np.float64)
    # Band-ordered accumulation keeps the result independent of BLAS threading.
    for wk, band in zip(w, ms):
        out += wk * band
    return out


def pixelwise_combine(a, b, op: str, epsilon: float = 1e-6) -> np.ndarray:
    """Elementwise ``add``, ``subtract``, ``multiply`` or ``safe_divide``.

    ``safe_divide`` divides by ``max(b, epsilon)`` wherever ``b < epsilon``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    if op == "add":
        return a + b
    if op == "subtract":
        return a - b
    if op == "multiply":
        return a * b
    if op == "safe_divide":
        return safe_divide(a, b, epsilon)
    raise ValueError(f"unknown operation {op!r}")


def safe_divide(a, b, epsilon: float) -> np.ndarray:
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    b = np.asarray(b, dtype=np.float64)
    return np.asarray(a, dtype=np.float64) / np.where(b < epsilon, epsilon, b)


def stats(r) -> tuple[float, float]:
    """Mean and population standard deviation (divisor ``N``)."""
    r = np.asarray(r, dtype=np.float64)
    if r.size == 0:
        raise ValueError("stats of an empty raster")
    mean = float(r.mean())
    std = float(np.sqrt(np.mean((r - mean) ** 2)))
    return mean, std
