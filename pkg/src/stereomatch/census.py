"""Census transform and Hamming-distance matching cost."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError
from .image_io import CostVolume, GrayImage

__all__ = ["CensusGrid", "census_transform", "census_cost_volume", "hamming", "window_offsets"]

DEFAULT_RADIUS = 4


def window_offsets(radius: int) -> list[tuple[int, int]]:
    """Neighbour offsets ``(dy, dx)`` in row-major order, centre skipped."""
    return [
        (dy, dx)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
        if (dy, dx) != (0, 0)
    ]


@dataclass(frozen=True, eq=False)
class CensusGrid:
    """Packed census strings.

    ``words[y, x, k // 64]`` holds bit ``k % 64`` of the string at (y, x).
    ``defined`` is False wherever the window leaves the image. Those pixels
    still carry a partial string: ``mask`` has a 1 for every neighbour that
    lies inside the image, and bits outside the mask are 0.
    """

    words: np.ndarray
    mask: np.ndarray
    defined: np.ndarray
    radius: int

    @property
    def height(self) -> int:
        return self.words.shape[0]

    @property
    def width(self) -> int:
        return self.words.shape[1]

    @property
    def nbits(self) -> int:
        return (2 * self.radius + 1) ** 2 - 1

    def bits(self, y: int, x: int) -> list[int]:
        """Unpacked string at one pixel, bit 0 first."""
        w = self.words[y, x]
        return [int((int(w[k // 64]) >> (k % 64)) & 1) for k in range(self.nbits)]

    def __eq__(self, other):
        if not isinstance(other, CensusGrid):
            return NotImplemented
        return (
            self.radius == other.radius
            and np.array_equal(self.words, other.words)
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.defined, other.defined)
        )

    __hash__ = None


def census_transform(img: GrayImage, radius: int = DEFAULT_RADIUS) -> CensusGrid:
    """Bit ``k`` is 1 iff the centre is strictly brighter than neighbour ``k``."""
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    a = img.data if isinstance(img, GrayImage) else np.asarray(img, dtype=np.float64)
    h, w = a.shape
    side = 2 * radius + 1
    if h < side or w < side:
        raise DimensionError(f"image {w}x{h} smaller than census window {side}x{side}")

    nbits = side * side - 1
    nwords = (nbits + 63) // 64
    words = np.zeros((h, w, nwords), dtype=np.uint64)
    mask = np.zeros((h, w, nwords), dtype=np.uint64)
    padded = np.pad(a, radius, constant_values=np.nan)
    for k, (dy, dx) in enumerate(window_offsets(radius)):
        nb = padded[radius + dy : radius + dy + h, radius + dx : radius + dx + w]
        inside = ~np.isnan(nb)
        # NaN compares False, so off-image neighbours leave their bit at 0
        shift = np.uint64(k % 64)
        words[:, :, k // 64] |= (a > nb).astype(np.uint64) << shift
        mask[:, :, k // 64] |= inside.astype(np.uint64) << shift

    defined = np.zeros((h, w), dtype=bool)
    defined[radius : h - radius, radius : w - radius] = True
    for arr in (words, mask, defined):
        arr.setflags(write=False)
    return CensusGrid(words, mask, defined, radius)


def hamming(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Popcount of ``a ^ b`` summed over the trailing word axis."""
    return np.bitwise_count(np.bitwise_xor(a, b)).sum(axis=-1, dtype=np.int64)


def census_cost_volume(
    left: CensusGrid, right: CensusGrid, d_max: int, partial_borders: bool = True
) -> CostVolume:
    """``cost[y, x, d] = hamming(S_left(y, x), S_right(y, x - d))``.

    Entries with ``x - d < 0`` get the string length as border cost. Where a
    window leaves the image, ``partial_borders`` compares only the bits both
    strings have inside the image and rescales the count to full length;
    with ``partial_borders=False`` those entries get the border cost too.
    """
    if left.words.shape != right.words.shape or left.radius != right.radius:
        raise DimensionError(
            f"census grids differ: {left.words.shape}/r={left.radius} vs "
            f"{right.words.shape}/r={right.radius}"
        )
    if d_max < 0:
        raise ValueError(f"d_max must be >= 0, got {d_max}")
    h, w = left.height, left.width
    border = left.nbits
    costs = np.full((h, w, d_max + 1), border, dtype=np.float32)
    for d in range(min(d_max, w - 1) + 1):
        wl, wr = left.words[:, d:], right.words[:, : w - d]
        full = left.defined[:, d:] & right.defined[:, : w - d]
        if partial_borders:
            common = left.mask[:, d:] & right.mask[:, : w - d]
            diff = np.bitwise_count((wl ^ wr) & common).sum(axis=-1, dtype=np.int64)
            n = np.bitwise_count(common).sum(axis=-1, dtype=np.int64)
            scaled = diff * border / np.maximum(n, 1)
            costs[:, d:, d] = np.where(full, diff, np.where(n > 0, scaled, border))
        else:
            costs[:, d:, d] = np.where(full, hamming(wl, wr), border)
    return CostVolume(costs, border)
