"""Forward and backward passes for the 1D layer zoo.

Activations travel as float64 arrays of shape (batch B, channels C, length L).
Convolution uses the cross-correlation convention (no kernel flip) with
stride 1 and symmetric same-padding, which requires an odd kernel width.
Each forward that needs state for its backward returns that state explicitly;
nothing is hidden in the parameter records except train-mode batch-norm
running statistics, whose in-place momentum update is part of the contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ShapeError

TRAIN = "train"
EVAL = "eval"

BN_EPS = 1e-8
BN_MOMENTUM = 0.1


@dataclass
class ConvParams:
    weights: np.ndarray  # (C_out, C_in, k)
    bias: np.ndarray  # (C_out,)

    def __post_init__(self):
        if self.weights.ndim != 3:
            raise ShapeError("conv weights must have shape (C_out, C_in, k)")
        if self.k % 2 == 0:
            raise ConfigError("kernel width must be odd for symmetric same-padding")
        if self.bias.shape != (self.c_out,):
            raise ShapeError("conv bias length must equal C_out")

    @property
    def c_out(self) -> int:
        return self.weights.shape[0]

    @property
    def c_in(self) -> int:
        return self.weights.shape[1]

    @property
    def k(self) -> int:
        return self.weights.shape[2]

    @property
    def padding(self) -> int:
        return self.k // 2


@dataclass
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    eps: float = BN_EPS

    def __post_init__(self):
        c = self.gamma.shape[0]
        for name in ("beta", "running_mean", "running_var"):
            if getattr(self, name).shape != (c,):
                raise ShapeError(f"batch-norm {name} must have length {c}")
        if not 0.0 < self.momentum < 1.0:
            raise ConfigError("batch-norm momentum must be in (0, 1)")
        if self.eps <= 0.0:
            raise ConfigError("batch-norm eps must be positive")

    @property
    def c(self) -> int:
        return self.gamma.shape[0]


@dataclass
class DenseParams:
    weights: np.ndarray  # (K, C_in)
    bias: np.ndarray  # (K,)

    def __post_init__(self):
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError("dense weights must be (K, C_in) with length-K bias")

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    @property
    def c_in(self) -> int:
        return self.weights.shape[1]


def _check_tensor3(x: np.ndarray) -> None:
    if x.ndim != 3:
        raise ShapeError(f"expected (B, C, L) tensor, got shape {x.shape}")


# --- convolution ------------------------------------------------------------

def _im2col(x: np.ndarray, k: int, pad: int) -> tuple[np.ndarray, int]:
    B, C, L = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    win = sliding_window_view(xp, k, axis=2)  # (B, C, L, k)
    return win.transpose(0, 2, 1, 3).reshape(B * L, C * k), L


def conv1d_forward(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Pre-activation cross-correlation: out[b,j,l] = sum_i (x_i * w_ij)[l] + b_j."""
    _check_tensor3(x)
    if x.shape[1] != p.c_in:
        raise ShapeError(f"input has {x.shape[1]} channels, conv expects {p.c_in}")
    B, _, L = x.shape
    col, _ = _im2col(x, p.k, p.padding)
    out = col @ p.weights.reshape(p.c_out, -1).T + p.bias
    return out.reshape(B, L, p.c_out).transpose(0, 2, 1)


def conv1d_backward(
    x: np.ndarray, p: ConvParams, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact gradients of conv1d_forward w.r.t. input, weights, and bias."""
    _check_tensor3(x)
    if grad_out.shape != (x.shape[0], p.c_out, x.shape[2]):
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match conv output")
    B, C_in, L = x.shape
    k, pad = p.k, p.padding
    col, _ = _im2col(x, k, pad)
    go = grad_out.transpose(0, 2, 1).reshape(B * L, p.c_out)

    grad_w = (go.T @ col).reshape(p.c_out, C_in, k)
    grad_b = go.sum(axis=0)

    gcol = (go @ p.weights.reshape(p.c_out, -1)).reshape(B, L, C_in, k)
    grad_xp = np.zeros((B, C_in, L + 2 * pad))
    for t in range(k):
        grad_xp[:, :, t : t + L] += gcol[:, :, :, t].transpose(0, 2, 1)
    grad_x = grad_xp[:, :, pad : pad + L] if pad else grad_xp
    return grad_x, grad_w, grad_b


# --- batch normalization ----------------------------------------------------

def batchnorm_forward(x: np.ndarray, p: BatchNormParams, mode: str) -> tuple[np.ndarray, dict | None]:
    """Normalize per channel over (batch, length).

    Train mode uses batch statistics and folds them into the running values
    (new = (1 - momentum) * old + momentum * batch); eval mode reads the
    running values and needs no cache.
    """
    _check_tensor3(x)
    if x.shape[1] != p.c:
        raise ShapeError(f"input has {x.shape[1]} channels, batch-norm expects {p.c}")
    if mode == EVAL:
        inv = 1.0 / np.sqrt(p.running_var + p.eps)
        out = (x - p.running_mean[:, None]) * inv[:, None] * p.gamma[:, None] + p.beta[:, None]
        return out, None
    B, _, L = x.shape
    if B * L < 2:
        raise ShapeError("train-mode batch-norm needs at least 2 values per channel")
    mean = x.mean(axis=(0, 2))
    var = x.var(axis=(0, 2))
    inv = 1.0 / np.sqrt(var + p.eps)
    x_hat = (x - mean[:, None]) * inv[:, None]
    out = x_hat * p.gamma[:, None] + p.beta[:, None]
    p.running_mean[:] = (1.0 - p.momentum) * p.running_mean + p.momentum * mean
    p.running_var[:] = (1.0 - p.momentum) * p.running_var + p.momentum * var
    return out, {"x_hat": x_hat, "inv": inv, "gamma": p.gamma}


def batchnorm_backward(cache: dict, grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients w.r.t. input, gamma, beta for a train-mode forward."""
    x_hat, inv, gamma = cache["x_hat"], cache["inv"], cache["gamma"]
    grad_gamma = (grad_out * x_hat).sum(axis=(0, 2))
    grad_beta = grad_out.sum(axis=(0, 2))
    n = grad_out.shape[0] * grad_out.shape[2]
    g_mean = grad_out.mean(axis=(0, 2))
    gx_mean = (grad_out * x_hat).sum(axis=(0, 2)) / n
    grad_x = (gamma * inv)[:, None] * (grad_out - g_mean[:, None] - x_hat * gx_mean[:, None])
    return grad_x, grad_gamma, grad_beta


# --- elementwise / pooling --------------------------------------------------

def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    # subgradient at 0 taken as 0
    return grad_out * (x > 0.0)


def dropout(
    x: np.ndarray, p_drop: float, mode: str, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout: survivors scaled by 1/(1-p) so eval is the identity.

    Returns (out, mask) where mask already carries the survivor scaling and is
    reused verbatim by the backward pass.
    """
    if not 0.0 <= p_drop < 1.0:
        raise ConfigError("dropout probability must lie in [0, 1)")
    if mode == EVAL or p_drop == 0.0:
        return x, None
    if rng is None:
        raise ConfigError("train-mode dropout needs an rng")
    mask = (rng.random(x.shape) >= p_drop) / (1.0 - p_drop)
    return x * mask, mask


def dropout_backward(mask: np.ndarray | None, grad_out: np.ndarray) -> np.ndarray:
    return grad_out if mask is None else grad_out * mask


def maxpool1d(x: np.ndarray, width: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Non-overlapping max pooling; an odd tail is truncated.

    Returns (out, argmax) with argmax holding each window's first maximal
    offset, which the backward pass routes the gradient to.
    """
    _check_tensor3(x)
    B, C, L = x.shape
    n_win = L // width
    xw = x[:, :, : n_win * width].reshape(B, C, n_win, width)
    return xw.max(axis=3), xw.argmax(axis=3)


def maxpool1d_backward(
    argmax: np.ndarray, in_length: int, grad_out: np.ndarray, width: int = 2
) -> np.ndarray:
    B, C, n_win = grad_out.shape
    gxw = np.zeros((B, C, n_win, width))
    np.put_along_axis(gxw, argmax[..., None], grad_out[..., None], axis=3)
    grad_x = np.zeros((B, C, in_length))
    grad_x[:, :, : n_win * width] = gxw.reshape(B, C, n_win * width)
    return grad_x


def gap(x: np.ndarray) -> np.ndarray:
    """Global average pooling: per-channel mean over length, -> (B, C, 1)."""
    _check_tensor3(x)
    return x.mean(axis=2, keepdims=True)


def gap_backward(in_length: int, grad_out: np.ndarray) -> np.ndarray:
    return np.broadcast_to(grad_out / in_length, grad_out.shape[:2] + (in_length,)).copy()


# --- classifier head --------------------------------------------------------

def dense_forward(x: np.ndarray, p: DenseParams) -> np.ndarray:
    """Affine head on (B, C, 1) activations; returns (B, K) logits."""
    _check_tensor3(x)
    if x.shape[1] != p.c_in or x.shape[2] != 1:
        raise ShapeError(f"dense expects (B, {p.c_in}, 1), got {x.shape}")
    return x[:, :, 0] @ p.weights.T + p.bias


def dense_backward(
    x: np.ndarray, p: DenseParams, grad_logits: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if grad_logits.shape != (x.shape[0], p.n_out):
        raise ShapeError("grad_logits shape does not match dense output")
    x2 = x[:, :, 0]
    grad_w = grad_logits.T @ x2
    grad_b = grad_logits.sum(axis=0)
    grad_x = (grad_logits @ p.weights)[:, :, None]
    return grad_x, grad_w, grad_b


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction; rows sum to 1 within 1e-9."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)
