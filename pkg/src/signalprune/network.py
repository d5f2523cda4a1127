"""Three-block 1D-CNN assembly: Conv -> BN -> ReLU -> Dropout -> MaxPool, x3,
then GAP -> Dense. Deterministic He-uniform initialization, composed forward
pass with a layer cache, and the mirrored backward pass."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from . import layers
from .errors import ConfigError, ShapeError
from .layers import (
    EVAL,
    TRAIN,
    BatchNormParams,
    ConvParams,
    DenseParams,
)


@dataclass
class Architecture:
    """Concrete hyperparameters of one network instance."""

    c1: int
    c2: int
    c3: int
    k: int = 5
    p_drop: float = 0.3
    d: int = 178
    n_classes: int = 2

    def as_tuple(self) -> tuple:
        return (self.c1, self.c2, self.c3, self.k, self.p_drop, self.d, self.n_classes)

    @property
    def widths(self) -> tuple[int, int, int]:
        return (self.c1, self.c2, self.c3)


@dataclass
class Block:
    conv: ConvParams
    bn: BatchNormParams
    p_drop: float
    pool_width: int = 2


@dataclass
class NetworkParams:
    blocks: list[Block]
    dense: DenseParams
    d: int  # expected input length

    def __post_init__(self):
        c_in = 1
        for i, b in enumerate(self.blocks):
            if b.conv.c_in != c_in:
                raise ShapeError(f"block {i} expects {b.conv.c_in} input channels, has {c_in}")
            if b.bn.c != b.conv.c_out:
                raise ShapeError(f"block {i} batch-norm width does not match conv output")
            c_in = b.conv.c_out
        if self.dense.c_in != c_in:
            raise ShapeError("dense input width must equal the last conv output width")

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(b.conv.c_out for b in self.blocks)

    @property
    def n_classes(self) -> int:
        return self.dense.n_out

    @property
    def n_kernels(self) -> int:
        return sum(self.widths)

    def architecture(self) -> Architecture:
        w = self.widths
        b0 = self.blocks[0]
        return Architecture(w[0], w[1], w[2], b0.conv.k, b0.p_drop, self.d, self.n_classes)

    def param_count(self) -> int:
        return sum(a.size for _, a in iter_params(self))

    def clone(self) -> "NetworkParams":
        return copy.deepcopy(self)


def iter_params(net: NetworkParams) -> list[tuple[str, np.ndarray]]:
    """Learnable parameter records in a stable order (running stats excluded)."""
    out: list[tuple[str, np.ndarray]] = []
    for i, b in enumerate(net.blocks):
        out.append((f"conv{i}.weights", b.conv.weights))
        out.append((f"conv{i}.bias", b.conv.bias))
        out.append((f"bn{i}.gamma", b.bn.gamma))
        out.append((f"bn{i}.beta", b.bn.beta))
    out.append(("dense.weights", net.dense.weights))
    out.append(("dense.bias", net.dense.bias))
    return out


def decayed_param_names(net: NetworkParams) -> set[str]:
    """Weight decay touches conv/dense weights only, never biases or BN."""
    return {n for n, _ in iter_params(net) if n.endswith(".weights")}


def init_network(arch: Architecture, seed: int) -> NetworkParams:
    """He-uniform conv/dense weights (bound sqrt(6/fan_in)), zero biases,
    unit gamma, zero beta, running stats (0, 1). Deterministic in seed."""
    if not arch.c1 < arch.c2 < arch.c3:
        raise ConfigError(f"conv widths must increase, got {arch.widths}")
    if arch.k % 2 == 0 or arch.k < 1:
        raise ConfigError("kernel width must be odd and positive")
    if not 0.0 <= arch.p_drop < 1.0:
        raise ConfigError("dropout probability must lie in [0, 1)")
    min_len = arch.d
    for _ in range(3):
        min_len //= 2
    if min_len < 1:
        raise ConfigError(f"input length {arch.d} vanishes after three poolings")

    rng = np.random.default_rng(seed)

    def he_uniform(shape, fan_in):
        bound = np.sqrt(6.0 / fan_in)
        return rng.uniform(-bound, bound, size=shape)

    blocks = []
    c_in = 1
    for c_out in arch.widths:
        conv = ConvParams(
            weights=he_uniform((c_out, c_in, arch.k), c_in * arch.k),
            bias=np.zeros(c_out),
        )
        bn = BatchNormParams(
            gamma=np.ones(c_out),
            beta=np.zeros(c_out),
            running_mean=np.zeros(c_out),
            running_var=np.ones(c_out),
        )
        blocks.append(Block(conv=conv, bn=bn, p_drop=arch.p_drop))
        c_in = c_out
    dense = DenseParams(
        weights=he_uniform((arch.n_classes, c_in), c_in),
        bias=np.zeros(arch.n_classes),
    )
    return NetworkParams(blocks=blocks, dense=dense, d=arch.d)


def network_forward(
    net: NetworkParams,
    x: np.ndarray,
    mode: str = EVAL,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, dict]:
    """Run the full network; returns (logits, cache) with cache feeding
    network_backward. x must be (B, 1, d)."""
    if mode not in (TRAIN, EVAL):
        raise ConfigError(f"mode must be '{TRAIN}' or '{EVAL}', got {mode!r}")
    if x.ndim != 3 or x.shape[1] != 1:
        raise ShapeError(f"network input must be (B, 1, L), got {x.shape}")
    if x.shape[2] != net.d:
        raise ShapeError(f"network expects length {net.d}, got {x.shape[2]}")

    cache: dict = {"mode": mode, "blocks": []}
    h = x
    for b in net.blocks:
        conv_in = h
        z = layers.conv1d_forward(h, b.conv)
        bn_out, bn_cache = layers.batchnorm_forward(z, b.bn, mode)
        a = layers.relu(bn_out)
        drop_out_, mask = layers.dropout(a, b.p_drop, mode, rng)
        pooled, argmax = layers.maxpool1d(drop_out_, b.pool_width)
        cache["blocks"].append(
            {
                "conv_in": conv_in,
                "bn_cache": bn_cache,
                "relu_in": bn_out,
                "drop_mask": mask,
                "pool_argmax": argmax,
                "pool_in_length": drop_out_.shape[2],
            }
        )
        h = pooled
    cache["gap_in_length"] = h.shape[2]
    g = layers.gap(h)
    cache["dense_in"] = g
    logits = layers.dense_forward(g, net.dense)
    return logits, cache


def network_backward(
    net: NetworkParams, cache: dict, grad_logits: np.ndarray
) -> dict[str, np.ndarray]:
    """Gradients for every learnable parameter, keyed like iter_params."""
    if cache["mode"] != TRAIN:
        raise ConfigError("backward requires a train-mode forward cache")
    grads: dict[str, np.ndarray] = {}
    grad_g, grads["dense.weights"], grads["dense.bias"] = layers.dense_backward(
        cache["dense_in"], net.dense, grad_logits
    )
    grad_h = layers.gap_backward(cache["gap_in_length"], grad_g)
    for i in reversed(range(len(net.blocks))):
        b = net.blocks[i]
        c = cache["blocks"][i]
        grad_pool = layers.maxpool1d_backward(
            c["pool_argmax"], c["pool_in_length"], grad_h, b.pool_width
        )
        grad_drop = layers.dropout_backward(c["drop_mask"], grad_pool)
        grad_bn_out = layers.relu_backward(c["relu_in"], grad_drop)
        grad_z, grads[f"bn{i}.gamma"], grads[f"bn{i}.beta"] = layers.batchnorm_backward(
            c["bn_cache"], grad_bn_out
        )
        grad_h, grads[f"conv{i}.weights"], grads[f"conv{i}.bias"] = layers.conv1d_backward(
            c["conv_in"], b.conv, grad_z
        )
    return grads
