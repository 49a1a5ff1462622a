"""Disparity extraction and post-processing."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .exceptions import DimensionError
from .image_io import CostVolume, DisparityMap

__all__ = ["wta", "subpixel", "lr_check", "right_cost_volume", "median_fuse"]


def wta(cv: CostVolume) -> DisparityMap:
    """Per-pixel argmin over disparity; ties go to the smaller disparity."""
    return DisparityMap(np.argmin(cv.costs, axis=2).astype(np.float32))


def subpixel(cv: CostVolume, d: DisparityMap) -> DisparityMap:
    """Parabola through the costs at d-1, d, d+1.

    Pixels at either end of the disparity range, with a non-positive
    curvature, or already invalid keep their integer disparity.
    """
    if d.shape != cv.shape[:2]:
        raise DimensionError(f"disparity {d.shape} does not match volume {cv.shape[:2]}")
    c = cv.costs.astype(np.float64)
    di = np.rint(d.data).astype(np.int64)
    inner = d.valid & (di >= 1) & (di <= cv.d_max - 1)
    di_c = np.clip(di, 1, max(cv.d_max - 1, 1))
    if cv.d_max < 2:
        return d
    c_minus = np.take_along_axis(c, (di_c - 1)[..., None], axis=2)[..., 0]
    c_zero = np.take_along_axis(c, di_c[..., None], axis=2)[..., 0]
    c_plus = np.take_along_axis(c, (di_c + 1)[..., None], axis=2)[..., 0]
    denom = c_minus - 2.0 * c_zero + c_plus
    use = inner & (denom > 0)
    offset = np.zeros_like(c_zero)
    offset[use] = (c_minus[use] - c_plus[use]) / (2.0 * denom[use])
    offset = np.clip(offset, -0.5, 0.5)
    out = np.where(use, di + offset, d.data)
    return DisparityMap(out.astype(np.float32), d.valid)


def lr_check(dL: DisparityMap, dR: DisparityMap, tol: float = 1.0) -> DisparityMap:
    """Invalidate ``p`` unless ``|dL(p) - dR(p - dL(p))| <= tol``.

    The right-image column is rounded to the nearest pixel; lookups outside
    the image invalidate. Disparity values are never modified.
    """
    if dL.shape != dR.shape:
        raise DimensionError(f"left map {dL.shape} and right map {dR.shape} differ")
    h, w = dL.shape
    xs = np.arange(w)[None, :]
    xr = np.floor(xs - dL.data.astype(np.float64) + 0.5).astype(np.int64)
    inside = (xr >= 0) & (xr < w)
    xr_c = np.clip(xr, 0, w - 1)
    rows = np.arange(h)[:, None]
    right_d = dR.data[rows, xr_c]
    right_ok = dR.valid[rows, xr_c]
    consistent = np.abs(dL.data.astype(np.float64) - right_d) <= tol
    return dL.with_valid(dL.valid & inside & right_ok & consistent)


def right_cost_volume(cvL: CostVolume) -> CostVolume:
    """Right-referenced volume ``C_R(y, x, d) = C_L(y, x + d, d)``; border cost past the edge."""
    c = cvL.costs
    h, w, nd = c.shape
    out = np.full_like(c, cvL.border_cost)
    for d in range(min(nd, w)):
        out[:, : w - d, d] = c[:, d:, d]
    return CostVolume(out, cvL.border_cost)


def median_fuse(maps: Sequence[DisparityMap]) -> DisparityMap:
    """Per-pixel lower median of the valid inputs; invalid where none is valid."""
    if not maps:
        raise ValueError("median_fuse needs at least one map")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise DimensionError(f"cannot fuse maps of shape {shape} and {m.shape}")
    stack = np.stack([np.where(m.valid, m.data, np.inf) for m in maps])
    count = np.stack([m.valid for m in maps]).sum(axis=0)
    stack.sort(axis=0)
    k = np.maximum(count - 1, 0) // 2
    fused = np.take_along_axis(stack, k[None], axis=0)[0]
    valid = count > 0
    return DisparityMap(np.where(valid, fused, 0).astype(np.float32), valid)
