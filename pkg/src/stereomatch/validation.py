"""Input coercion helpers used by the estimator and CLI."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionError
from .image_io import DisparityMap, GrayImage


def check_image(img, name: str = "image") -> GrayImage:
    """Accept a GrayImage or a 2-D array of intensities in [0, 1]."""
    if isinstance(img, GrayImage):
        return img
    a = np.asarray(img)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if a.dtype == np.uint8:
        a = a / 255.0
    return GrayImage(a)


def check_pair(pair, min_size: int = 1) -> tuple[GrayImage, GrayImage]:
    """Validate one ``(left, right)`` stereo pair."""
    try:
        left, right = pair
    except (TypeError, ValueError):
        raise DimensionError("a stereo pair must be a (left, right) 2-tuple") from None
    left = check_image(left, "left")
    right = check_image(right, "right")
    if left.shape != right.shape:
        raise DimensionError(f"left {left.shape} and right {right.shape} differ in size")
    if min(left.shape) < min_size:
        raise DimensionError(f"images {left.shape} smaller than the {min_size}px matching window")
    return left, right


def check_pairs(X, min_size: int = 1) -> list[tuple[GrayImage, GrayImage]]:
    """Sequence of stereo pairs; a single bare pair is also accepted."""
    if isinstance(X, tuple) and len(X) == 2 and _is_image_like(X[0]):
        X = [X]
    pairs = [check_pair(p, min_size) for p in X]
    if not pairs:
        raise ValueError("no stereo pairs given")
    return pairs


def check_disparity(d, name: str = "disparity") -> DisparityMap:
    if isinstance(d, DisparityMap):
        return d
    a = np.asarray(d, dtype=np.float32)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    return DisparityMap(a)


def _is_image_like(obj) -> bool:
    return isinstance(obj, GrayImage) or (hasattr(obj, "ndim") and obj.ndim == 2)
