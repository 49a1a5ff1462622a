"""Synthetic rectified stereo pairs with exact ground truth.

The left image is random-dot texture quantised to 8 bits. The right image is
the left image warped by ``x' = x - d(x, y)`` (nearer surfaces win where two
left pixels land on the same right pixel), with fresh texture filling the
disoccluded holes, followed by gain, bias and Gaussian noise. Left pixels
that are hidden in the right view, or fall off its left edge, are invalid
in the truth map.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cnn import PatchTriple
from .exceptions import GenerationError
from .image_io import DisparityMap, GrayImage, save_pfm, save_pgm

__all__ = [
    "SceneSpec",
    "generate",
    "extract_triples",
    "load_scene_config",
    "write_scene",
    "disparity_field",
]

TERRAINS = ("constant", "blocks", "ramp")


@dataclass(frozen=True)
class SceneSpec:
    """Scene parameters.

    ``disparity`` is the background (or constant) disparity; blocks are raised
    to ``block_disparity``; a ramp runs linearly from ``disparity`` at the left
    edge to ``block_disparity`` at the right edge.
    """

    width: int = 256
    height: int = 256
    d_max: int = 16
    terrain: str = "blocks"
    disparity: float = 5.0
    block_disparity: float = 12.0
    n_blocks: int = 3
    noise_sigma: float = 0.0
    gain: float = 1.0
    bias: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.terrain not in TERRAINS:
            raise ValueError(f"terrain must be one of {TERRAINS}, got {self.terrain!r}")
        if self.width < 1 or self.height < 1:
            raise ValueError("scene size must be positive")
        for name in ("disparity", "block_disparity"):
            v = getattr(self, name)
            if not 0 <= v <= self.d_max:
                raise ValueError(f"{name}={v} outside [0, d_max={self.d_max}]")
        if self.noise_sigma < 0 or self.gain <= 0 or self.n_blocks < 0:
            raise ValueError("noise_sigma >= 0, gain > 0 and n_blocks >= 0 required")


def _quantize(a: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(a, 0.0, 1.0) * 255.0) / 255.0


def disparity_field(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    """Left-view disparity for every pixel, float64 (H, W)."""
    h, w = spec.height, spec.width
    if spec.terrain == "constant":
        return np.full((h, w), float(spec.disparity))
    if spec.terrain == "ramp":
        t = np.arange(w) / max(w - 1, 1)
        row = spec.disparity + (spec.block_disparity - spec.disparity) * t
        return np.tile(row, (h, 1))
    d = np.full((h, w), float(spec.disparity))
    for _ in range(spec.n_blocks):
        bh = int(rng.integers(max(h // 8, 1), max(h // 4, 1) + 1))
        bw = int(rng.integers(max(w // 8, 1), max(w // 4, 1) + 1))
        y0 = int(rng.integers(0, h - bh + 1))
        x0 = int(rng.integers(0, w - bw + 1))
        d[y0 : y0 + bh, x0 : x0 + bw] = spec.block_disparity
    return d


def _warp_integer(left, disp, fill):
    h, w = left.shape
    di = disp.astype(np.int64)
    xs = np.broadcast_to(np.arange(w), (h, w))
    ys = np.broadcast_to(np.arange(h)[:, None], (h, w))
    xr = xs - di
    inside = xr >= 0
    # z-buffer: the largest disparity (nearest surface) owns each right pixel
    zbuf = np.full((h, w), -1, dtype=np.int64)
    np.maximum.at(zbuf, (ys[inside], xr[inside]), di[inside])
    visible = np.zeros((h, w), dtype=bool)
    visible[inside] = zbuf[ys[inside], xr[inside]] == di[inside]
    right = fill.copy()
    right[ys[visible], xr[visible]] = left[visible]
    return right, visible


def _warp_fractional(left, disp, fill):
    # x - d(x) must be increasing along each row so the warp has no folds
    h, w = left.shape
    xs = np.arange(w, dtype=np.float64)
    right = fill.copy()
    for y in range(h):
        u = xs - disp[y]
        if np.any(np.diff(u) <= 0):
            raise GenerationError("fractional disparity field folds over; use blocks terrain")
        xq = np.arange(w, dtype=np.float64)
        hit = (xq >= u[0]) & (xq <= u[-1])
        right[y, hit] = np.interp(xq[hit], u, left[y])
    visible = (xs[None, :] - disp) >= 0
    return right, visible


def generate(spec: SceneSpec) -> tuple[GrayImage, GrayImage, DisparityMap]:
    """Build ``(left, right, truth)``; a pure function of ``spec``."""
    rng = np.random.default_rng(spec.rng_seed)
    h, w = spec.height, spec.width
    left = rng.integers(0, 256, size=(h, w)) / 255.0
    fill = rng.integers(0, 256, size=(h, w)) / 255.0
    disp = disparity_field(spec, rng)
    noise = rng.standard_normal((h, w))

    if np.all(disp == np.round(disp)):
        right, visible = _warp_integer(left, disp, fill)
    else:
        right, visible = _warp_fractional(left, disp, fill)

    right = spec.gain * right + spec.bias
    if spec.noise_sigma > 0:
        right = right + spec.noise_sigma * noise
    right = _quantize(right)
    truth = DisparityMap(disp.astype(np.float32), visible)
    return GrayImage(left), GrayImage(right), truth


def extract_triples(
    left: GrayImage,
    right: GrayImage,
    truth: DisparityMap,
    count: int,
    rng_seed: int = 0,
    patch_size: int = 9,
    neg_range: tuple[int, int] = (2, 8),
    augment: bool = False,
) -> list[PatchTriple]:
    """Sample training triples around valid ground-truth pixels.

    The negative patch sits at the true disparity plus an offset whose
    magnitude is uniform on ``neg_range`` and whose sign is random. With
    ``augment`` each triple gets, independently with probability 0.5, a
    gain in [0.8, 1.25] and bias in [-0.1, 0.1] on its right patches, and a
    vertical jitter of one row on both right patches.
    """
    if count < 1:
        raise ValueError("count must be positive")
    L, R = left.data, right.data
    h, w = L.shape
    r = patch_size // 2
    lo, hi = neg_range
    jit = 1 if augment else 0
    ys, xs = np.nonzero(truth.valid)
    dv = np.rint(truth.data[ys, xs]).astype(np.int64)
    xp = xs - dv
    keep = (ys >= r + jit) & (ys < h - r - jit) & (xs >= r) & (xs < w - r)
    keep &= (xp >= r) & (xp < w - r)
    ys, xs, dv = ys[keep], xs[keep], dv[keep]
    if ys.size == 0:
        raise GenerationError("no valid ground-truth pixel admits a full set of patches")

    rng = np.random.default_rng(rng_seed)
    triples = []
    attempts = 0
    while len(triples) < count:
        attempts += 1
        if attempts > 50 * count + 1000:
            raise GenerationError(f"could only place {len(triples)} of {count} triples")
        i = int(rng.integers(ys.size))
        y, x, d = int(ys[i]), int(xs[i]), int(dv[i])
        offset = int(rng.integers(lo, hi + 1)) * (1 if rng.random() < 0.5 else -1)
        xn = x - d - offset
        if not r <= xn < w - r:
            offset = -offset
            xn = x - d - offset
            if not r <= xn < w - r:
                continue
        xpos = x - d
        dy = 0
        gain, bias = 1.0, 0.0
        if augment:
            if rng.random() < 0.5:
                gain = float(np.exp(rng.uniform(np.log(0.8), np.log(1.25))))
                bias = float(rng.uniform(-0.1, 0.1))
            if rng.random() < 0.5:
                dy = 1 if rng.random() < 0.5 else -1
        ref = L[y - r : y + r + 1, x - r : x + r + 1]
        yr = y + dy
        pos = R[yr - r : yr + r + 1, xpos - r : xpos + r + 1]
        neg = R[yr - r : yr + r + 1, xn - r : xn + r + 1]
        if gain != 1.0 or bias != 0.0:
            pos = np.clip(gain * pos + bias, 0.0, 1.0)
            neg = np.clip(gain * neg + bias, 0.0, 1.0)
        triples.append(
            PatchTriple(
                ref.copy(),
                pos.copy(),
                neg.copy(),
                center=(y, x),
                true_disparity=float(truth.data[y, x]),
                negative_disparity=float(d + offset),
            )
        )
    return triples


def load_scene_config(path) -> SceneSpec:
    """Parse a flat ``key = value`` file (``#`` comments) into a :class:`SceneSpec`."""
    defaults = {f.name: f.default for f in dataclasses.fields(SceneSpec)}
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in defaults:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            kind = type(defaults[key])
            try:
                values[key] = kind(value) if kind is not int else int(value, 10)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return SceneSpec(**values)


def write_scene(left: GrayImage, right: GrayImage, truth: DisparityMap, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"left": out / "left.pgm", "right": out / "right.pgm", "truth": out / "truth.pfm"}
    save_pgm(left, paths["left"])
    save_pgm(right, paths["right"])
    save_pfm(truth, paths["truth"])
    return paths
