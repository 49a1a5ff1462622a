"""Siamese convolutional matching cost.

A stack of four valid 3x3 convolutions (ReLU after all but the last) maps a
9x9 patch to a feature vector. Both branches share one set of weights, so a
single :class:`FeatureNetwork` is applied to the left and right image. Costs
are the negated cosine similarity of L2-normalised features.

Everything here is plain numpy: convolutions are lowered to matrix products
over sliding windows and the backward pass is written out by hand.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import (
    DimensionError,
    FormatError,
    TrainingError,
    TruncatedFileError,
    VersionError,
)
from .image_io import CostVolume, GrayImage

__all__ = [
    "ConvLayer",
    "FeatureNetwork",
    "FeatureGrid",
    "PatchTriple",
    "TrainResult",
    "init_network",
    "forward_features",
    "forward_patches",
    "cnn_cost_volume",
    "hinge_loss",
    "batch_hinge_loss",
    "train",
    "save_weights",
    "load_weights",
]

log = logging.getLogger(__name__)

DEFAULT_CHANNELS = (1, 64, 64, 64, 64)
NUM_LAYERS = 4
NORM_EPS = 1e-12
WEIGHTS_MAGIC = b"FCNN1"
BORDER_COST = 1.0


@dataclass(frozen=True, eq=False)
class ConvLayer:
    """Weights ``(out, in, k, k)`` and bias ``(out,)``."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weight)
        b = np.asarray(self.bias)
        if w.ndim != 4 or w.shape[2] != w.shape[3] or w.shape[2] % 2 != 1:
            raise DimensionError(f"conv weight must be (out, in, k, k) with odd k, got {w.shape}")
        if b.shape != (w.shape[0],):
            raise DimensionError(f"bias shape {b.shape} does not match {w.shape[0]} outputs")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("conv parameters must be finite")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b.astype(w.dtype))

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def kernel(self) -> int:
        return self.weight.shape[2]

    def as_matrix(self) -> np.ndarray:
        # rows ordered (in, ky, kx) to match the sliding-window layout
        return self.weight.transpose(1, 2, 3, 0).reshape(-1, self.out_channels)


@dataclass(frozen=True, eq=False)
class FeatureNetwork:
    """Four chained conv layers; the same instance serves both siamese branches."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if len(layers) != NUM_LAYERS:
            raise DimensionError(f"network needs exactly {NUM_LAYERS} layers, got {len(layers)}")
        if layers[0].in_channels != 1:
            raise DimensionError(f"first layer must take 1 channel, takes {layers[0].in_channels}")
        for i in range(1, len(layers)):
            if layers[i].in_channels != layers[i - 1].out_channels:
                raise DimensionError(
                    f"layer {i + 1} expects {layers[i].in_channels} inputs but layer {i} "
                    f"produces {layers[i - 1].out_channels}"
                )
        dtypes = {layer.weight.dtype for layer in layers}
        if len(dtypes) != 1:
            raise ValueError(f"mixed parameter dtypes {dtypes}")
        object.__setattr__(self, "layers", layers)

    @property
    def channels(self) -> tuple[int, ...]:
        return (1,) + tuple(layer.out_channels for layer in self.layers)

    @property
    def dim(self) -> int:
        return self.layers[-1].out_channels

    @property
    def receptive_field(self) -> int:
        return 1 + sum(layer.kernel - 1 for layer in self.layers)

    @property
    def radius(self) -> int:
        return self.receptive_field // 2

    @property
    def dtype(self) -> np.dtype:
        return self.layers[0].weight.dtype

    def parameters(self) -> list[np.ndarray]:
        """Flat list ``[w1, b1, w2, b2, ...]``."""
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def with_parameters(self, params: Sequence[np.ndarray]) -> "FeatureNetwork":
        it = iter(params)
        return FeatureNetwork(tuple(ConvLayer(next(it), next(it)) for _ in self.layers))

    def astype(self, dtype) -> "FeatureNetwork":
        return self.with_parameters([p.astype(dtype) for p in self.parameters()])

    def __eq__(self, other):
        if not isinstance(other, FeatureNetwork):
            return NotImplemented
        a, b = self.parameters(), other.parameters()
        return len(a) == len(b) and all(
            x.dtype == y.dtype and x.shape == y.shape and np.array_equal(x, y) for x, y in zip(a, b)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FeatureGrid:
    """Per-pixel feature vectors ``(H, W, dim)``, each unit length or exactly zero."""

    vectors: np.ndarray

    @property
    def height(self) -> int:
        return self.vectors.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    @property
    def dim(self) -> int:
        return self.vectors.shape[2]

    @property
    def nonzero(self) -> np.ndarray:
        return np.any(self.vectors != 0, axis=2)


@dataclass(frozen=True, eq=False)
class PatchTriple:
    """Reference patch with a matching (positive) and non-matching (negative) right patch.

    ``center`` is the reference pixel ``(y, x)``; ``true_disparity`` and
    ``negative_disparity`` record where the two right patches were cut.
    """

    reference: np.ndarray
    positive: np.ndarray
    negative: np.ndarray
    center: tuple[int, int] | None = None
    true_disparity: float | None = None
    negative_disparity: float | None = None

    def __post_init__(self):
        shapes = {np.shape(self.reference), np.shape(self.positive), np.shape(self.negative)}
        if len(shapes) != 1:
            raise DimensionError(f"triple patches differ in shape: {shapes}")
        shape = shapes.pop()
        if len(shape) != 2 or shape[0] != shape[1]:
            raise DimensionError(f"patches must be square 2-D, got {shape}")


class TrainResult(NamedTuple):
    network: FeatureNetwork
    epoch_losses: list
    initial_loss: float


def init_network(channels=DEFAULT_CHANNELS, kernel: int = 3, seed: int = 0, dtype=np.float32):
    """He-uniform weights, zero biases."""
    channels = tuple(int(c) for c in channels)
    if len(channels) != NUM_LAYERS + 1:
        raise DimensionError(f"need {NUM_LAYERS + 1} channel counts, got {channels}")
    rng = np.random.default_rng(seed)
    layers = []
    for cin, cout in zip(channels[:-1], channels[1:]):
        bound = np.sqrt(6.0 / (cin * kernel * kernel))
        w = rng.uniform(-bound, bound, size=(cout, cin, kernel, kernel)).astype(dtype)
        layers.append(ConvLayer(w, np.zeros(cout, dtype=dtype)))
    return FeatureNetwork(tuple(layers))


# -- forward / backward ------------------------------------------------------


def _conv(x: np.ndarray, layer: ConvLayer) -> tuple[np.ndarray, np.ndarray]:
    """Valid convolution of channels-last ``x`` (N, H, W, C). Returns output and im2col matrix."""
    k = layer.kernel
    n, h, w, c = x.shape
    ho, wo = h - k + 1, w - k + 1
    cols = sliding_window_view(x, (k, k), axis=(1, 2)).reshape(n * ho * wo, c * k * k)
    y = cols @ layer.as_matrix()
    y += layer.bias
    return y.reshape(n, ho, wo, layer.out_channels), cols


def _conv_backward(dy, cols, layer: ConvLayer, x_shape):
    k = layer.kernel
    n, h, w, c = x_shape
    ho, wo = h - k + 1, w - k + 1
    dy2 = dy.reshape(-1, layer.out_channels)
    dwm = cols.T @ dy2
    dw = dwm.reshape(c, k, k, layer.out_channels).transpose(3, 0, 1, 2)
    db = dy2.sum(axis=0)
    dcols = (dy2 @ layer.as_matrix().T).reshape(n, ho, wo, c, k, k)
    dx = np.zeros(x_shape, dtype=dy.dtype)
    for i in range(k):
        for j in range(k):
            dx[:, i : i + ho, j : j + wo, :] += dcols[..., i, j]
    return dx, dw, db


def _forward(net: FeatureNetwork, x: np.ndarray, cache: list | None = None) -> np.ndarray:
    last = len(net.layers) - 1
    for i, layer in enumerate(net.layers):
        x_in = x
        x, cols = _conv(x_in, layer)
        if i < last:
            x = np.maximum(x, 0)
        if cache is not None:
            cache.append((x_in.shape, cols, x))
    return x


def _backward(net: FeatureNetwork, dout: np.ndarray, cache: list) -> list[np.ndarray]:
    grads = [None] * (2 * len(net.layers))
    d = dout
    last = len(net.layers) - 1
    for i in range(last, -1, -1):
        x_shape, cols, out = cache[i]
        if i < last:
            d = d * (out > 0)
        d, dw, db = _conv_backward(d, cols, net.layers[i], x_shape)
        grads[2 * i], grads[2 * i + 1] = dw, db
    return grads


def _normalize(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.sqrt(np.sum(v * v, axis=-1, keepdims=True))
    safe = np.where(norms < NORM_EPS, 1.0, norms)
    u = np.where(norms < NORM_EPS, 0.0, v / safe).astype(v.dtype)
    return u, norms


def forward_patches(net: FeatureNetwork, patches: np.ndarray) -> np.ndarray:
    """Unit feature vectors for a stack of receptive-field sized patches ``(N, k, k)``."""
    p = np.asarray(patches, dtype=net.dtype)
    rf = net.receptive_field
    if p.ndim != 3 or p.shape[1:] != (rf, rf):
        raise DimensionError(f"patches must be (N, {rf}, {rf}), got {p.shape}")
    v = _forward(net, p[..., None]).reshape(len(p), net.dim)
    return _normalize(v)[0]


def forward_features(net: FeatureNetwork, img: GrayImage, rows_per_chunk: int = 32) -> FeatureGrid:
    """Dense unit features; pixels closer than the net radius to an edge stay zero."""
    a = img.data if isinstance(img, GrayImage) else np.asarray(img)
    a = a.astype(net.dtype)
    h, w = a.shape
    rf, r = net.receptive_field, net.radius
    if h < rf or w < rf:
        raise DimensionError(f"image {w}x{h} smaller than receptive field {rf}x{rf}")
    out = np.zeros((h, w, net.dim), dtype=net.dtype)
    ho = h - rf + 1
    # row strips bound the im2col memory
    for y0 in range(0, ho, rows_per_chunk):
        y1 = min(ho, y0 + rows_per_chunk)
        strip = a[y0 : y1 + rf - 1][None, :, :, None]
        v = _forward(net, strip)[0]
        out[r + y0 : r + y1, r : w - r] = _normalize(v)[0]
    out.setflags(write=False)
    return FeatureGrid(out)


def cnn_cost_volume(fL: FeatureGrid, fR: FeatureGrid, d_max: int) -> CostVolume:
    """``cost[y, x, d] = -dot(fL[y, x], fR[y, x - d])``; +1 where infeasible or zero."""
    if fL.vectors.shape != fR.vectors.shape:
        raise DimensionError(f"feature grids differ: {fL.vectors.shape} vs {fR.vectors.shape}")
    if d_max < 0:
        raise ValueError(f"d_max must be >= 0, got {d_max}")
    h, w = fL.height, fL.width
    costs = np.full((h, w, d_max + 1), BORDER_COST, dtype=np.float32)
    okL, okR = fL.nonzero, fR.nonzero
    for d in range(min(d_max, w - 1) + 1):
        dots = np.einsum("ijk,ijk->ij", fL.vectors[:, d:], fR.vectors[:, : w - d])
        ok = okL[:, d:] & okR[:, : w - d]
        costs[:, d:, d] = np.where(ok, -dots, BORDER_COST)
    np.clip(costs, -1.0, 1.0, out=costs)
    return CostVolume(costs, BORDER_COST)


# -- loss and training -------------------------------------------------------


def _stack_triples(triples: Sequence[PatchTriple], dtype):
    ref = np.stack([t.reference for t in triples]).astype(dtype)
    pos = np.stack([t.positive for t in triples]).astype(dtype)
    neg = np.stack([t.negative for t in triples]).astype(dtype)
    return ref, pos, neg


def _loss_and_grads(net, ref, pos, neg, margin, need_grad=True):
    """Mean hinge loss over a batch of stacked patches and its parameter gradients."""
    n = len(ref)
    x = np.concatenate([ref, pos, neg])[..., None]
    cache = [] if need_grad else None
    v = _forward(net, x, cache).reshape(3 * n, net.dim)
    u, norms = _normalize(v)
    ur, up, un = u[:n], u[n : 2 * n], u[2 * n :]
    s_pos = np.sum(ur * up, axis=1)
    s_neg = np.sum(ur * un, axis=1)
    raw = margin + s_neg - s_pos
    active = raw > 0
    loss = float(np.where(active, raw, 0.0).sum() / n)
    if not need_grad:
        return loss, None
    a = (active / n).astype(v.dtype)[:, None]
    du = np.concatenate([(un - up) * a, -ur * a, ur * a])
    safe = np.where(norms < NORM_EPS, 1.0, norms)
    dv = (du - u * np.sum(u * du, axis=1, keepdims=True)) / safe
    dv = np.where(norms < NORM_EPS, 0.0, dv).astype(v.dtype)
    grads = _backward(net, dv.reshape(3 * n, 1, 1, net.dim), cache)
    return loss, grads


def hinge_loss(net: FeatureNetwork, t: PatchTriple, margin: float = 0.2):
    """``max(0, margin + s_neg - s_pos)`` for one triple, with gradients.

    Gradients come back in :meth:`FeatureNetwork.parameters` order.
    """
    if margin <= 0:
        raise ValueError(f"margin must be positive, got {margin}")
    ref, pos, neg = _stack_triples([t], net.dtype)
    return _loss_and_grads(net, ref, pos, neg, margin)


def batch_hinge_loss(net: FeatureNetwork, triples: Sequence[PatchTriple], margin: float = 0.2,
                     batch_size: int = 512) -> float:
    """Mean loss over ``triples`` without gradients."""
    ref, pos, neg = _stack_triples(triples, net.dtype)
    total = 0.0
    for i in range(0, len(ref), batch_size):
        sl = slice(i, i + batch_size)
        loss, _ = _loss_and_grads(net, ref[sl], pos[sl], neg[sl], margin, need_grad=False)
        total += loss * len(ref[sl])
    return total / len(ref)


def train(
    net: FeatureNetwork,
    data: Sequence[PatchTriple],
    margin: float = 0.2,
    learning_rate: float = 0.002,
    epochs: int = 20,
    rng_seed: int = 0,
    batch_size: int = 128,
    momentum: float = 0.9,
    callback: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Mini-batch SGD with classical momentum on the hinge loss.

    Batch order is drawn from ``rng_seed`` so repeated runs are bit-identical.
    """
    if not len(data):
        raise ValueError("training data is empty")
    if margin <= 0:
        raise ValueError(f"margin must be positive, got {margin}")
    if batch_size < 1 or epochs < 0:
        raise ValueError("batch_size must be >= 1 and epochs >= 0")
    ref, pos, neg = _stack_triples(data, net.dtype)
    n = len(ref)
    rng = np.random.default_rng(rng_seed)
    params = [p.copy() for p in net.parameters()]
    velocity = [np.zeros_like(p) for p in params]
    lr = net.dtype.type(learning_rate)
    mu = net.dtype.type(momentum)

    initial = batch_hinge_loss(net, data, margin)
    log.info("initial loss %.6f", initial)
    losses = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, batch_size)):
            idx = order[start : start + batch_size]
            current = net.with_parameters(params)
            loss, grads = _loss_and_grads(current, ref[idx], pos[idx], neg[idx], margin)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                norms = [float(np.linalg.norm(g)) for g in grads]
                raise TrainingError(
                    f"non-finite loss/gradient at epoch {epoch}, batch {b}: loss={loss}, "
                    f"grad norms={norms}, lr={learning_rate}"
                )
            with np.errstate(invalid="ignore", over="ignore"):
                for p, v, g in zip(params, velocity, grads):
                    v *= mu
                    v -= lr * g
                    p += v
            if not all(np.all(np.isfinite(p)) for p in params):
                raise TrainingError(
                    f"parameters became non-finite at epoch {epoch}, batch {b}: "
                    f"loss={loss}, lr={learning_rate}"
                )
            total += loss * len(idx)
        mean = total / n
        losses.append(mean)
        log.info("epoch %d mean loss %.6f", epoch + 1, mean)
        if callback is not None:
            callback(epoch, mean)
    return TrainResult(net.with_parameters(params), losses, initial)


# -- weight file -------------------------------------------------------------


def save_weights(net: FeatureNetwork, path) -> None:
    """Write ``FCNN1`` + layer count + per-layer (out, in, kh, kw) header and float32 LE data."""
    with open(path, "wb") as f:
        f.write(WEIGHTS_MAGIC)
        f.write(struct.pack("<I", len(net.layers)))
        for layer in net.layers:
            f.write(struct.pack("<4I", *layer.weight.shape))
            f.write(np.ascontiguousarray(layer.weight, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())


def load_weights(path) -> FeatureNetwork:
    with open(path, "rb") as f:
        buf = f.read()
    magic = buf[: len(WEIGHTS_MAGIC)]
    if magic != WEIGHTS_MAGIC:
        if magic[:4] == WEIGHTS_MAGIC[:4]:
            raise VersionError(f"{path}: unsupported weight format version {magic!r}")
        raise FormatError(f"{path}: not a weight file (magic {magic!r})")
    off = len(WEIGHTS_MAGIC)

    def take(nbytes):
        nonlocal off
        if off + nbytes > len(buf):
            raise TruncatedFileError(f"{path}: weight file truncated at byte {off}")
        chunk = buf[off : off + nbytes]
        off += nbytes
        return chunk

    (count,) = struct.unpack("<I", take(4))
    if count != NUM_LAYERS:
        raise FormatError(f"{path}: expected {NUM_LAYERS} layers, header says {count}")
    layers = []
    for _ in range(count):
        shape = struct.unpack("<4I", take(16))
        if 0 in shape:
            raise FormatError(f"{path}: empty layer shape {shape}")
        size = int(np.prod(shape))
        w = np.frombuffer(take(4 * size), dtype="<f4").reshape(shape).astype(np.float32)
        b = np.frombuffer(take(4 * shape[0]), dtype="<f4").astype(np.float32)
        try:
            layers.append(ConvLayer(w, b))
        except (DimensionError, ValueError) as exc:
            raise FormatError(f"{path}: bad layer: {exc}") from None
    if off != len(buf):
        raise FormatError(f"{path}: {len(buf) - off} trailing bytes")
    try:
        return FeatureNetwork(tuple(layers))
    except DimensionError as exc:
        raise FormatError(f"{path}: {exc}") from None
