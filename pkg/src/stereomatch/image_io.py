"""Raster types and the PGM / PFM file formats.

Intensities live in [0, 1] as float64. Disparities are float32 with a
separate boolean validity mask; on disk invalid pixels are ``-inf``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DataError,
    DimensionError,
    FormatError,
    TruncatedFileError,
    UnsupportedFormatError,
)

__all__ = [
    "GrayImage",
    "DisparityMap",
    "CostVolume",
    "load_pgm",
    "save_pgm",
    "load_pfm",
    "save_pfm",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-band intensity raster, values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64)
        if a.ndim != 2 or a.size == 0:
            raise DimensionError(f"GrayImage needs a non-empty 2-D array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DataError("GrayImage contains non-finite intensities")
        if a.min() < 0.0 or a.max() > 1.0:
            raise DataError("GrayImage intensities must lie in [0, 1]")
        object.__setattr__(self, "data", _frozen(a))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DisparityMap:
    """Per-pixel disparity (float32) plus a validity mask.

    Values under invalid pixels are kept (non-finite ones become 0) but are
    ignored by equality, so masking a pixel never alters its stored value.
    """

    data: np.ndarray
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float32)
        if a.ndim != 2 or a.size == 0:
            raise DimensionError(f"DisparityMap needs a non-empty 2-D array, got shape {a.shape}")
        if self.valid is None:
            v = np.isfinite(a)
        else:
            v = np.array(self.valid, dtype=bool)
            if v.shape != a.shape:
                raise DimensionError(f"mask shape {v.shape} != data shape {a.shape}")
        if np.any(np.isnan(a[v])) or np.any(np.isinf(a[v])):
            raise DataError("valid disparities must be finite")
        if np.any(a[v] < 0):
            raise DataError("valid disparities must be non-negative")
        a = np.where(v | np.isfinite(a), a, np.float32(0.0)).astype(np.float32)
        object.__setattr__(self, "data", _frozen(a))
        object.__setattr__(self, "valid", _frozen(v))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())

    @property
    def n_invalid(self) -> int:
        return int(self.valid.size - self.valid.sum())

    def to_array(self, invalid=-np.inf) -> np.ndarray:
        """Dense float32 copy with ``invalid`` written into masked pixels."""
        return np.where(self.valid, self.data, np.float32(invalid)).astype(np.float32)

    def with_valid(self, valid: np.ndarray) -> "DisparityMap":
        return DisparityMap(self.data, valid)

    def __eq__(self, other):
        if not isinstance(other, DisparityMap):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.valid, other.valid)
            and np.array_equal(
                np.where(self.valid, self.data, 0).view(np.uint32),
                np.where(other.valid, other.data, 0).view(np.uint32),
            )
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class CostVolume:
    """Dense matching costs indexed ``(row, column, disparity)``; lower is better.

    ``border_cost`` is the value written wherever ``x - d < 0`` or a
    descriptor is undefined.
    """

    costs: np.ndarray
    border_cost: float

    def __post_init__(self):
        c = np.asarray(self.costs)
        if c.dtype.kind != "f":
            c = c.astype(np.float64)
        if c.ndim != 3 or c.shape[2] < 1:
            raise DimensionError(f"CostVolume needs shape (H, W, D+1), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise DataError("CostVolume contains non-finite costs")
        object.__setattr__(self, "costs", _frozen(c))
        object.__setattr__(self, "border_cost", float(self.border_cost))

    @property
    def height(self) -> int:
        return self.costs.shape[0]

    @property
    def width(self) -> int:
        return self.costs.shape[1]

    @property
    def d_max(self) -> int:
        return self.costs.shape[2] - 1

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.costs.shape


# -- PGM ---------------------------------------------------------------------


def _read_header_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace separated tokens, skipping ``#`` comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last token.
    """
    tokens = []
    i, n = 0, len(buf)
    while len(tokens) < count:
        while i < n and buf[i : i + 1].isspace():
            i += 1
        if i < n and buf[i : i + 1] == b"#":
            while i < n and buf[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        if i >= n:
            raise FormatError("header ended early")
        j = i
        while j < n and not buf[j : j + 1].isspace() and buf[j : j + 1] != b"#":
            j += 1
        tokens.append(buf[i:j])
        i = j
    if i >= n or not buf[i : i + 1].isspace():
        raise FormatError("header must end with a single whitespace byte")
    return tokens, i + 1


def load_pgm(path) -> GrayImage:
    """Read a binary 8-bit PGM (``P5``, maxval 255) into a :class:`GrayImage`."""
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 2:
        raise FormatError(f"{path}: file too short for a PGM header")
    magic = buf[:2]
    if magic != b"P5":
        raise UnsupportedFormatError(f"{path}: magic {magic!r} is not binary PGM (P5)")
    tokens, offset = _read_header_tokens(buf[2:], 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError(f"{path}: non-integer PGM header field in {tokens!r}") from None
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: bad PGM size {width}x{height}")
    if maxval != 255:
        raise UnsupportedFormatError(f"{path}: maxval {maxval} unsupported, need 255")
    payload = buf[2 + offset :]
    if len(payload) < width * height:
        raise TruncatedFileError(
            f"{path}: expected {width * height} bytes of pixels, found {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8, count=width * height)
    return GrayImage(pixels.reshape(height, width).astype(np.float64) / 255.0)


def save_pgm(image, path) -> None:
    """Write intensities in [0, 1] (GrayImage or array) as 8-bit ``P5``."""
    a = image.data if isinstance(image, GrayImage) else np.asarray(image, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"save_pgm needs a 2-D raster, got shape {a.shape}")
    q = np.clip(np.rint(np.clip(a, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    h, w = q.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(q.tobytes())


# -- PFM ---------------------------------------------------------------------


def save_pfm(dmap: DisparityMap, path) -> None:
    """Write a grayscale little-endian PFM, rows bottom-up, invalid as ``-inf``."""
    if not isinstance(dmap, DisparityMap):
        dmap = DisparityMap(dmap)
    a = dmap.to_array(-np.inf)
    h, w = a.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n%d %d\n-1.0\n" % (w, h))
        f.write(np.flipud(a).astype("<f4").tobytes())


def load_pfm(path) -> DisparityMap:
    """Read a grayscale PFM written by :func:`save_pfm` or any conforming tool."""
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 2:
        raise FormatError(f"{path}: file too short for a PFM header")
    magic = buf[:2]
    if magic == b"PF":
        raise UnsupportedFormatError(f"{path}: color PFM (PF) is not supported")
    if magic != b"Pf":
        raise FormatError(f"{path}: magic {magic!r} is not PFM")
    tokens, offset = _read_header_tokens(buf[2:], 3)
    try:
        width, height = int(tokens[0]), int(tokens[1])
        scale = float(tokens[2])
    except ValueError:
        raise FormatError(f"{path}: bad PFM header {tokens!r}") from None
    if width <= 0 or height <= 0 or scale == 0.0:
        raise FormatError(f"{path}: bad PFM header {tokens!r}")
    dtype = "<f4" if scale < 0 else ">f4"
    payload = buf[2 + offset :]
    need = 4 * width * height
    if len(payload) < need:
        raise TruncatedFileError(f"{path}: expected {need} payload bytes, found {len(payload)}")
    a = np.frombuffer(payload, dtype=dtype, count=width * height).reshape(height, width)
    a = np.flipud(a).astype(np.float32)
    if np.any(np.isnan(a)):
        raise DataError(f"{path}: NaN in PFM payload")
    if np.any(a == np.inf):
        raise DataError(f"{path}: +inf in PFM payload")
    return DisparityMap(a, a != -np.inf)

