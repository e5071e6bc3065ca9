"""Compact digit classifier: conv backbone, max-pool + stride-2 conv neck,
flatten + ReLU dense head producing class logits.

No residual/bottleneck blocks, no spatial pyramid pooling and no
upsample-concatenate nodes; the layer vocabulary below cannot express them.
"""

from __future__ import annotations

import hashlib
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from gridscan.errors import EmptyDataset, FormatError, ShapeMismatch
from gridscan.recognizer import layers as L

log = logging.getLogger(__name__)

MAGIC = b"GSW1"


@dataclass(frozen=True)
class Conv:
    in_ch: int
    out_ch: int
    k: int = 3
    stride: int = 1
    pad: int = 1


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class MaxPool:
    k: int = 2
    stride: int = 2


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Dense:
    in_d: int
    out_d: int


Layer = Union[Conv, ReLU, MaxPool, Flatten, Dense]


@dataclass(frozen=True)
class NetworkArch:
    layers: tuple[Layer, ...]
    input_shape: tuple[int, int, int] = (1, 32, 32)

    def __post_init__(self):
        shape = self.output_shape()
        if len(shape) != 1:
            raise ShapeMismatch(f"architecture must end in a flat logit vector, ends in {shape}")

    def shapes(self) -> list[tuple[int, ...]]:
        """Per-layer output shapes (without the batch axis); raises on a broken chain."""
        shape: tuple[int, ...] = self.input_shape
        out = []
        for layer in self.layers:
            if isinstance(layer, Conv):
                if len(shape) != 3 or shape[0] != layer.in_ch:
                    raise ShapeMismatch(f"{layer} cannot consume {shape}")
                c, h, w = shape
                shape = (
                    layer.out_ch,
                    L.conv_output_size(h, layer.k, layer.stride, layer.pad),
                    L.conv_output_size(w, layer.k, layer.stride, layer.pad),
                )
            elif isinstance(layer, MaxPool):
                if len(shape) != 3:
                    raise ShapeMismatch(f"{layer} cannot consume {shape}")
                c, h, w = shape
                shape = (c, L.conv_output_size(h, layer.k, layer.stride, 0), L.conv_output_size(w, layer.k, layer.stride, 0))
            elif isinstance(layer, Flatten):
                shape = (int(np.prod(shape)),)
            elif isinstance(layer, Dense):
                if shape != (layer.in_d,):
                    raise ShapeMismatch(f"{layer} cannot consume {shape}")
                shape = (layer.out_d,)
            if min(shape) < 1:
                raise ShapeMismatch(f"{layer} produced empty shape {shape}")
            out.append(shape)
        return out

    def output_shape(self) -> tuple[int, ...]:
        shapes = self.shapes()
        return shapes[-1] if shapes else self.input_shape

    @property
    def num_classes(self) -> int:
        return self.output_shape()[0]

    def param_shapes(self) -> list[tuple[int, ...]]:
        out = []
        for layer in self.layers:
            if isinstance(layer, Conv):
                out += [(layer.out_ch, layer.in_ch, layer.k, layer.k), (layer.out_ch,)]
            elif isinstance(layer, Dense):
                out += [(layer.out_d, layer.in_d), (layer.out_d,)]
        return out

    def fingerprint(self) -> bytes:
        return hashlib.sha256(repr(self).encode()).digest()


def default_arch(num_classes: int = 10, size: int = 32, widths: Sequence[int] = (16, 32, 64), hidden: int = 128) -> NetworkArch:
    c1, c2, c3 = widths
    after_pool = L.conv_output_size(size, 2, 2, 0)
    neck = L.conv_output_size(after_pool, 3, 2, 1)
    return NetworkArch(
        (
            Conv(1, c1, 3, 1, 1),
            ReLU(),
            Conv(c1, c2, 3, 1, 1),
            ReLU(),
            MaxPool(2, 2),
            Conv(c2, c3, 3, 2, 1),
            ReLU(),
            Flatten(),
            Dense(c3 * neck * neck, hidden),
            ReLU(),
            Dense(hidden, num_classes),
        ),
        (1, size, size),
    )


@dataclass
class NetworkWeights:
    params: list[np.ndarray]
    arch_fingerprint: bytes
    seed: int = 0

    def copy(self) -> "NetworkWeights":
        return NetworkWeights([p.copy() for p in self.params], self.arch_fingerprint, self.seed)

    def check(self, arch: NetworkArch) -> None:
        if self.arch_fingerprint != arch.fingerprint():
            raise ShapeMismatch("weights were produced for a different architecture")
        shapes = [p.shape for p in self.params]
        if shapes != arch.param_shapes():
            raise ShapeMismatch(f"parameter shapes {shapes} do not match {arch.param_shapes()}")


def init_weights(arch: NetworkArch, seed: int = 0) -> NetworkWeights:
    """He-uniform kernels and matrices, zero biases."""
    rng = np.random.default_rng(seed)
    params = []
    for shape in arch.param_shapes():
        if len(shape) == 1:
            params.append(np.zeros(shape, dtype=np.float32))
        else:
            fan_in = int(np.prod(shape[1:]))
            limit = np.sqrt(6.0 / fan_in)
            params.append(rng.uniform(-limit, limit, size=shape).astype(np.float32))
    return NetworkWeights(params, arch.fingerprint(), seed)


def forward(arch: NetworkArch, weights: NetworkWeights | Sequence[np.ndarray], x: np.ndarray, *, keep_cache: bool = False):
    """Logits for a batch ``(n, *arch.input_shape)``.

    With ``keep_cache`` returns ``(logits, caches)`` for :func:`backward`.
    """
    params = weights.params if isinstance(weights, NetworkWeights) else list(weights)
    if x.ndim != 4 or tuple(x.shape[1:]) != arch.input_shape:
        raise ShapeMismatch(f"expected batch of shape (n, {', '.join(map(str, arch.input_shape))}), got {x.shape}")
    caches = []
    pi = 0
    for layer in arch.layers:
        if isinstance(layer, Conv):
            x, cache = L.conv2d_forward(x, params[pi], params[pi + 1], layer.stride, layer.pad)
            pi += 2
        elif isinstance(layer, Dense):
            x, cache = L.fc_forward(x, params[pi], params[pi + 1])
            pi += 2
        elif isinstance(layer, ReLU):
            x, cache = L.relu_forward(x)
        elif isinstance(layer, MaxPool):
            x, cache = L.maxpool_forward(x, layer.k, layer.stride)
        else:
            x, cache = L.flatten_forward(x)
        caches.append(cache)
    return (x, caches) if keep_cache else x


def backward(arch: NetworkArch, caches: list, dlogits: np.ndarray) -> list[np.ndarray]:
    """Parameter gradients in the same order as ``NetworkWeights.params``."""
    grads: list[np.ndarray] = []
    d = dlogits
    for layer, cache in zip(reversed(arch.layers), reversed(caches)):
        if isinstance(layer, Conv):
            d, dw, db = L.conv2d_backward(d, cache)
            grads += [db, dw]
        elif isinstance(layer, Dense):
            d, dw, db = L.fc_backward(d, cache)
            grads += [db, dw]
        elif isinstance(layer, ReLU):
            d = L.relu_backward(d, cache)
        elif isinstance(layer, MaxPool):
            d = L.maxpool_backward(d, cache)
        else:
            d = L.flatten_backward(d, cache)
    return grads[::-1]


def loss_and_grads(arch, params, x, y):
    logits, caches = forward(arch, params, x, keep_cache=True)
    loss, dlogits = L.softmax_cross_entropy(logits, y)
    return loss, backward(arch, caches, dlogits)


@dataclass
class TrainConfig:
    epochs: int = 5
    batch: int = 32
    lr: float = 0.01
    momentum: float = 0.9
    seed: int = 0


@dataclass
class TrainResult:
    weights: NetworkWeights
    epoch_losses: list[float] = field(default_factory=list)
    initial_loss: float = float("nan")


def train(x: np.ndarray, y: np.ndarray, cfg: TrainConfig = TrainConfig(), arch: NetworkArch | None = None) -> TrainResult:
    """Minibatch SGD with momentum.

    ``x`` is ``(n, 1, 32, 32)`` in [0, 1]; ``y`` holds class ids. Init and the
    per-epoch shuffle are both derived from ``cfg.seed``. ``epoch_losses[e]`` is
    the mean minibatch loss seen during epoch ``e``; ``initial_loss`` is the
    full-set loss before the first update.
    """
    if len(x) == 0:
        raise EmptyDataset("training split is empty")
    arch = arch or default_arch()
    x = np.asarray(x, dtype=np.float32)
    y = np.asarray(y, dtype=np.int64)
    weights = init_weights(arch, cfg.seed)
    params = weights.params
    velocity = [np.zeros_like(p) for p in params]
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    lr, mu = np.float32(cfg.lr), np.float32(cfg.momentum)

    initial = evaluate_loss(arch, weights, x, y)
    losses = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(x))
        total, count = 0.0, 0
        for start in range(0, len(x), cfg.batch):
            idx = order[start : start + cfg.batch]
            loss, grads = loss_and_grads(arch, params, x[idx], y[idx])
            for p, v, g in zip(params, velocity, grads):
                v *= mu
                v -= lr * g.astype(np.float32)
                p += v
            total += loss * len(idx)
            count += len(idx)
        losses.append(total / count)
        log.info("epoch %d loss %.4f", epoch, losses[-1])
    return TrainResult(weights, losses, initial)


def evaluate_loss(arch, weights, x, y, batch: int = 256) -> float:
    total = 0.0
    for start in range(0, len(x), batch):
        logits = forward(arch, weights, x[start : start + batch])
        loss, _ = L.softmax_cross_entropy(logits, y[start : start + batch])
        total += loss * len(logits)
    return total / len(x)


def predict_proba(arch, weights, x, batch: int = 256) -> np.ndarray:
    out = [L.softmax(forward(arch, weights, x[s : s + batch])) for s in range(0, len(x), batch)]
    return np.concatenate(out) if out else np.zeros((0, arch.num_classes), dtype=np.float32)


def accuracy(arch, weights, x, y) -> float:
    if len(x) == 0:
        return float("nan")
    return float((predict_proba(arch, weights, x).argmax(axis=1) == np.asarray(y)).mean())


# ---------------------------------------------------------------- weights file
#
# "GSW1" | u32 record count | records | u64 seed | 32-byte arch fingerprint
# record: u8 kind | u32 rank | rank x u32 dims | f32 payload (little-endian)

KIND_CONV_KERNEL, KIND_CONV_BIAS, KIND_FC_MATRIX, KIND_FC_BIAS = 1, 2, 3, 4


def _kind(shape: tuple[int, ...]) -> int:
    return {4: KIND_CONV_KERNEL, 2: KIND_FC_MATRIX}.get(len(shape), 0)


def encode_weights(w: NetworkWeights) -> bytes:
    parts = [MAGIC, struct.pack("<I", len(w.params))]
    kinds = []
    for p in w.params:
        kind = _kind(p.shape)
        if kind == 0:
            kind = KIND_CONV_BIAS if kinds and kinds[-1] == KIND_CONV_KERNEL else KIND_FC_BIAS
        kinds.append(kind)
        parts.append(struct.pack("<BI", kind, p.ndim))
        parts.append(struct.pack(f"<{p.ndim}I", *p.shape))
        parts.append(np.ascontiguousarray(p, dtype="<f4").tobytes())
    parts.append(struct.pack("<Q", w.seed & 0xFFFFFFFFFFFFFFFF))
    parts.append(w.arch_fingerprint)
    return b"".join(parts)


def decode_weights(buf: bytes) -> NetworkWeights:
    if buf[:4] != MAGIC:
        raise FormatError(f"bad weights magic {buf[:4]!r}")
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise FormatError("truncated weights file")
        chunk = buf[pos : pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    params = []
    for _ in range(count):
        kind, rank = struct.unpack("<BI", take(5))
        if kind not in (1, 2, 3, 4) or rank not in (1, 2, 4):
            raise FormatError(f"bad record header kind={kind} rank={rank}")
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(dims))
        arr = np.frombuffer(take(4 * size), dtype="<f4").astype(np.float32).reshape(dims)
        params.append(arr)
    (seed,) = struct.unpack("<Q", take(8))
    fp = take(32)
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes in weights file")
    return NetworkWeights(params, fp, seed)


def save_weights(w: NetworkWeights, path: str | os.PathLike) -> None:
    Path(path).write_bytes(encode_weights(w))


def load_weights(path: str | os.PathLike) -> NetworkWeights:
    return decode_weights(Path(path).read_bytes())
