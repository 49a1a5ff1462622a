"""Semi-global cost aggregation.

Each path direction runs the usual scanline recurrence::

    L(p, d) = C(p, d) + min(L(p-r, d), L(p-r, d±1) + p1, min_k L(p-r, k) + p2)
              - min_k L(p-r, k)

Recurrences run in float32; the per-path results are summed into a float64
volume in a fixed direction order, so the output does not depend on how
paths are scheduled and integer multiples of a float32 cost stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DataError
from .image_io import CostVolume

__all__ = ["SgmParams", "DIRECTIONS", "aggregate", "aggregate_path", "normalize_costs"]

# (dy, dx): the predecessor of (y, x) along the path is (y - dy, x - dx).
# The first four are the horizontal/vertical passes used when num_paths == 4.
DIRECTIONS = (
    (0, 1),
    (0, -1),
    (1, 0),
    (-1, 0),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
)


@dataclass(frozen=True)
class SgmParams:
    p1: float = 0.03
    p2: float = 0.3
    num_paths: int = 8
    normalize: bool = True

    def __post_init__(self):
        if not (0 <= self.p1 <= self.p2):
            raise ValueError(f"need 0 <= p1 <= p2, got p1={self.p1}, p2={self.p2}")
        if self.p1 > 0 and self.p2 <= 0:
            raise ValueError("p2 must be positive when p1 is")
        if self.num_paths not in (4, 8):
            raise ValueError(f"num_paths must be 4 or 8, got {self.num_paths}")


def normalize_costs(cv: CostVolume) -> CostVolume:
    """Affine map of the whole volume onto [0, 1]; a constant volume becomes zeros."""
    c = cv.costs.astype(np.float64)
    lo, hi = float(c.min()), float(c.max())
    if hi == lo:
        return CostVolume(np.zeros(c.shape, dtype=np.float32), 0.0)
    scale = hi - lo
    out = ((c - lo) / scale).astype(np.float32)
    return CostVolume(out, (cv.border_cost - lo) / scale)


def _step(prev: np.ndarray, cost: np.ndarray, p1, p2) -> np.ndarray:
    """One recurrence step for a batch of pixels; arrays are (n, D)."""
    m = prev.min(axis=1, keepdims=True)
    best = np.minimum(prev, m + p2)
    if prev.shape[1] > 1:
        best[:, 1:] = np.minimum(best[:, 1:], prev[:, :-1] + p1)
        best[:, :-1] = np.minimum(best[:, :-1], prev[:, 1:] + p1)
    # subtracting m before adding C keeps p1 = p2 = 0 exact (best == m)
    return cost + (best - m)


def aggregate_path(cv: CostVolume, direction: tuple[int, int], p1: float, p2: float) -> np.ndarray:
    """Path costs ``L_r`` for one direction as a float32 (H, W, D) array."""
    dy, dx = direction
    if (dy, dx) == (0, 0) or abs(dy) > 1 or abs(dx) > 1:
        raise ValueError(f"bad direction {direction}")
    c = cv.costs.astype(np.float32)
    h, w, _ = c.shape
    p1 = np.float32(p1)
    p2 = np.float32(p2)
    L = np.empty_like(c)

    if dx != 0:
        # sweep columns; the predecessor column is shifted by dy rows
        xs = range(w) if dx > 0 else range(w - 1, -1, -1)
        first = True
        for x in xs:
            if first:
                L[:, x] = c[:, x]
                first = False
                continue
            prev = L[:, x - dx]
            if dy == 0:
                L[:, x] = _step(prev, c[:, x], p1, p2)
            elif dy > 0:
                L[0, x] = c[0, x]
                L[1:, x] = _step(prev[:-1], c[1:, x], p1, p2)
            else:
                L[-1, x] = c[-1, x]
                L[:-1, x] = _step(prev[1:], c[:-1, x], p1, p2)
    else:
        ys = range(h) if dy > 0 else range(h - 1, -1, -1)
        first = True
        for y in ys:
            if first:
                L[y] = c[y]
                first = False
                continue
            L[y] = _step(L[y - dy], c[y], p1, p2)
    return L


def aggregate(cv: CostVolume, params: SgmParams | None = None) -> CostVolume:
    """Sum of path costs over ``params.num_paths`` directions.

    Normalisation (when ``params.normalize``) happens first, so penalties are
    in units of the [0, 1] cost range.
    """
    params = params or SgmParams()
    if not np.all(np.isfinite(cv.costs)):
        raise DataError("cost volume contains non-finite values")
    src = normalize_costs(cv) if params.normalize else cv
    total = np.zeros(src.costs.shape, dtype=np.float64)
    for direction in DIRECTIONS[: params.num_paths]:
        total += aggregate_path(src, direction, params.p1, params.p2)
    return CostVolume(total, src.border_cost * params.num_paths)
