"""Raster container conventions, value scaling and file I/O.

A raster is a ``numpy.ndarray`` of shape ``(height, width, channels)`` and
dtype ``float32``. Channel counts 1, 2 and 3 are supported. Integer pixel
coordinates address pixel centers with the origin at the top-left corner;
the normalized coordinate of pixel ``(x, y)`` in a ``W x H`` raster is
``((x + 0.5) / W, (y + 0.5) / H)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

FMAP_MAGIC = b"FMAP"
FMAP_VERSION = 1
_HEADER = struct.Struct("<4sIIIII")

SUPPORTED_CHANNELS = (1, 2, 3)


class RasterError(ValueError):
    """Invalid raster shape, dimensions or contents."""


class FmapError(IOError):
    """Malformed FMAP file."""


@dataclass(frozen=True)
class ValueRange:
    lo: float
    hi: float


UNIT = ValueRange(0.0, 1.0)
SIGNED_UNIT = ValueRange(-1.0, 1.0)


def raster_create(width: int, height: int, channels: int, fill: float = 0.0) -> np.ndarray:
    if int(width) < 1 or int(height) < 1:
        raise RasterError(f"invalid raster size {width}x{height}")
    if channels not in SUPPORTED_CHANNELS:
        raise RasterError(f"unsupported channel count {channels}")
    if not np.isfinite(fill):
        raise RasterError("fill value must be finite")
    return np.full((int(height), int(width), channels), fill, dtype=np.float32)


def as_raster(a, channels: int | None = None, dtype=np.float32) -> np.ndarray:
    """Coerce ``a`` to a ``(H, W, C)`` raster, adding a channel axis to 2-D input.

    ``dtype`` is float32 for stored rasters; reductions pass float64 to avoid rounding inputs.
    """
    r = np.asarray(a, dtype=dtype)
    if r.ndim == 2:
        r = r[:, :, None]
    if r.ndim != 3 or r.shape[0] < 1 or r.shape[1] < 1:
        raise RasterError(f"expected (H, W, C) raster, got shape {r.shape}")
    if r.shape[2] not in SUPPORTED_CHANNELS:
        raise RasterError(f"unsupported channel count {r.shape[2]}")
    if channels is not None and r.shape[2] != channels:
        raise RasterError(f"expected {channels} channels, got {r.shape[2]}")
    return r


def pixel_grid(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer pixel-center coordinates ``(x, y)`` as float64 arrays of shape ``(H, W)``."""
    y, x = np.mgrid[0:height, 0:width]
    return x.astype(np.float64), y.astype(np.float64)


def normalized_coords(width: int, height: int) -> np.ndarray:
    """``(H, W, 2)`` float64 array of normalized pixel-center coordinates."""
    x, y = pixel_grid(width, height)
    return np.stack([(x + 0.5) / width, (y + 0.5) / height], axis=-1)


def rescale_linear(r, src: ValueRange, dst: ValueRange, *, strict: bool = True,
                   tol: float = 1e-6) -> np.ndarray:
    """Affinely map samples of ``r`` from ``src`` onto ``dst``.

    With ``strict`` (the default) samples outside ``src`` by more than ``tol``
    raise; samples within ``tol`` are clamped first.
    """
    if not src.lo < src.hi:
        raise RasterError(f"degenerate source range [{src.lo}, {src.hi}]")
    if not dst.lo < dst.hi:
        raise RasterError(f"degenerate target range [{dst.lo}, {dst.hi}]")
    a = np.asarray(r, dtype=np.float64)
    if strict:
        if a.size and (a.min() < src.lo - tol or a.max() > src.hi + tol):
            raise RasterError(f"samples outside source range [{src.lo}, {src.hi}]")
        a = np.clip(a, src.lo, src.hi)
    scale = (dst.hi - dst.lo) / (src.hi - src.lo)
    return ((a - src.lo) * scale + dst.lo).astype(np.float32)


def fmap_write(r, path) -> None:
    r = as_raster(r)
    if not np.all(np.isfinite(r)):
        raise RasterError("refusing to write non-finite samples")
    h, w, c = r.shape
    header = _HEADER.pack(FMAP_MAGIC, FMAP_VERSION, w, h, c, 0)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(r, dtype="<f4").tobytes())


def fmap_read(path) -> np.ndarray:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise FmapError(f"{path}: truncated header")
    magic, version, w, h, c, _ = _HEADER.unpack_from(blob)
    if magic != FMAP_MAGIC:
        raise FmapError(f"{path}: bad magic {magic!r}")
    if version != FMAP_VERSION:
        raise FmapError(f"{path}: unsupported version {version}")
    if c not in SUPPORTED_CHANNELS:
        raise FmapError(f"{path}: unsupported channel count {c}")
    if w < 1 or h < 1:
        raise FmapError(f"{path}: invalid size {w}x{h}")
    n = w * h * c
    payload = blob[_HEADER.size:]
    if len(payload) < 4 * n:
        raise FmapError(f"{path}: truncated payload ({len(payload)} of {4 * n} bytes)")
    data = np.frombuffer(payload, dtype="<f4", count=n)
    return data.astype(np.float32).reshape(h, w, c)


def image_write_png(r, path) -> None:
    r = as_raster(r)
    if r.shape[2] not in (1, 3):
        raise RasterError(f"PNG supports 1 or 3 channels, got {r.shape[2]}")
    # round-half-up quantization
    q = np.floor(np.clip(r.astype(np.float64), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    if q.shape[2] == 3:
        q = q[:, :, ::-1]
    if not cv2.imwrite(str(path), np.ascontiguousarray(q)):
        raise OSError(f"could not write {path}")


def image_read_png(path) -> np.ndarray:
    if not Path(path).is_file():
        raise FileNotFoundError(path)
    q = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if q is None:
        raise OSError(f"could not decode {path}")
    if q.dtype != np.uint8:
        raise RasterError(f"{path}: only 8-bit PNG is supported")
    if q.ndim == 2:
        q = q[:, :, None]
    elif q.shape[2] == 3:
        q = q[:, :, ::-1]
    else:
        raise RasterError(f"{path}: unsupported channel count {q.shape[2]}")
    return (q.astype(np.float32) / np.float32(255.0))


def luminance(image) -> np.ndarray:
    """Rec. 601 luma of a 3-channel raster as a 1-channel raster; 1-channel input passes through."""
    r = as_raster(image)
    if r.shape[2] == 1:
        return r.copy()
    if r.shape[2] != 3:
        raise RasterError("luminance needs 1 or 3 channels")
    w = np.array([0.299, 0.587, 0.114])
    return (r.astype(np.float64) @ w)[:, :, None].astype(np.float32)
