"""Raster files: a JSON header plus a raw band-sequential float32 payload, and PGM import.

Header example::

    {"width": 256, "height": 256, "bands": 4, "dtype": "f32",
     "layout": "band-sequential", "byte_order": "little-endian",
     "band_names": ["blue", "green", "red", "nir"]}

The payload holds ``bands`` planes of ``height x width`` little-endian float32
samples, row-major, with no padding.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass

import numpy as np

from .raster import as_multiband

DEFAULT_MAX_BYTES = 2 * 1024 ** 3

_REQUIRED = ("width", "height", "bands", "dtype", "layout", "byte_order")
_OPTIONAL = ("band_names",)
_F32_MAX = float(np.finfo(np.float32).max)


class FormatError(ValueError):
    """Malformed or inconsistent raster file."""


@dataclass(frozen=True)
class RasterHeader:
    width: int
    height: int
    bands: int
    dtype: str = "f32"
    layout: str = "band-sequential"
    byte_order: str = "little-endian"
    band_names: tuple[str, ...] | None = None

    @property
    def payload_bytes(self) -> int:
        return self.width * self.height * self.bands * 4

    def to_json(self) -> str:
        doc = {k: getattr(self, k) for k in _REQUIRED}
        if self.band_names:
            doc["band_names"] = list(self.band_names)
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc) -> "RasterHeader":
        if not isinstance(doc, dict):
            raise FormatError("header must be a JSON object")
        missing = [k for k in _REQUIRED if k not in doc]
        if missing:
            raise FormatError(f"header is missing fields: {', '.join(missing)}")
        unknown = sorted(set(doc) - set(_REQUIRED) - set(_OPTIONAL))
        if unknown:
            raise FormatError(f"header has unknown fields: {', '.join(unknown)}")
        for key in ("width", "height", "bands"):
            v = doc[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise FormatError(f"header field {key!r} must be a positive integer, got {v!r}")
        if doc["dtype"] != "f32":
            raise FormatError(f"unsupported dtype {doc['dtype']!r} (only 'f32')")
        if doc["layout"] != "band-sequential":
            raise FormatError(f"unsupported layout {doc['layout']!r}")
        if doc["byte_order"] != "little-endian":
            raise FormatError(f"unsupported byte_order {doc['byte_order']!r}")
        names = doc.get("band_names")
        if names is not None:
            if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
                raise FormatError("band_names must be a list of strings")
            if names and len(names) != doc["bands"]:
                raise FormatError(f"band_names has {len(names)} entries for {doc['bands']} bands")
            names = tuple(names) or None
        return cls(doc["width"], doc["height"], doc["bands"], band_names=names)


def image_paths(base: str | os.PathLike) -> tuple[str, str]:
    """Header and payload paths for ``base`` (``x``, ``x.json`` or ``x.raw``)."""
    base = os.fspath(base)
    stem, ext = os.path.splitext(base)
    if ext in (".json", ".raw"):
        return stem + ".json", stem + ".raw"
    return base + ".json", base + ".raw"


def read_header(header_path) -> RasterHeader:
    try:
        with open(header_path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{header_path}: invalid JSON ({exc})") from exc
    return RasterHeader.from_dict(doc)


def read_image(header_path, data_path, max_bytes: int = DEFAULT_MAX_BYTES) -> np.ndarray:
    """Load a ``(bands, height, width)`` float64 array."""
    header = read_header(header_path)
    expected = header.payload_bytes
    if expected > max_bytes:
        raise FormatError(f"{header_path}: payload of {expected} bytes exceeds the {max_bytes}-byte cap")
    actual = os.path.getsize(data_path)
    if actual != expected:
        what = "short" if actual < expected else "long"
        raise FormatError(
            f"{data_path}: payload is {abs(expected - actual)} bytes too {what} "
            f"(expected {expected}, found {actual})")
    data = np.fromfile(data_path, dtype="<f4", count=expected // 4)
    return data.astype(np.float64).reshape(header.bands, header.height, header.width)


def write_image(img, header_path, data_path, band_names=None) -> RasterHeader:
    img = as_multiband(img)
    if np.any(np.abs(img) > _F32_MAX):
        raise ValueError("image has samples outside the float32 range")
    bands, height, width = img.shape
    header = RasterHeader(width, height, bands, band_names=tuple(band_names) if band_names else None)
    if header.band_names is not None and len(header.band_names) != bands:
        raise ValueError(f"{len(header.band_names)} band names for {bands} bands")
    for path, write in ((data_path, lambda fh: fh.write(img.astype("<f4").tobytes())),
                        (header_path, lambda fh: fh.write(header.to_json().encode("utf-8")))):
        try:
            with open(path, "wb") as fh:
                write(fh)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return header


def load_image(base) -> np.ndarray:
    """Read a multiband image by base path, or a ``.pgm`` as a one-band stack."""
    if os.fspath(base).lower().endswith(".pgm"):
        return import_pgm(base)[np.newaxis]
    return read_image(*image_paths(base))


def save_image(img, base, band_names=None) -> RasterHeader:
    return write_image(img, *image_paths(base), band_names=band_names)


_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*([^\s#]+)")


def import_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM; 16-bit samples are big-endian."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {raw[:2]!r})")
    pos = 2
    fields = []
    for _ in range(3):
        m = _PGM_TOKEN.match(raw, pos)
        if m is None:
            raise FormatError(f"{path}: truncated PGM header")
        try:
            fields.append(int(m.group(1)))
        except ValueError:
            raise FormatError(f"{path}: bad PGM header token {m.group(1)!r}") from None
        pos = m.end()
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"{path}: invalid size {width}x{height}")
    if not 0 < maxval <= 65535:
        raise FormatError(f"{path}: maxval {maxval} outside 1..65535")
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise FormatError(f"{path}: missing whitespace after PGM header")
    pos += 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    if len(raw) - pos < need:
        raise FormatError(f"{path}: pixel data is {need - (len(raw) - pos)} bytes short")
    data = np.frombuffer(raw, dtype=dtype, count=width * height, offset=pos)
    return data.astype(np.float64).reshape(height, width)
