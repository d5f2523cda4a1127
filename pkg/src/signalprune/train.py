"""Cross-entropy/Adam training loop with early stopping on validation
macro-F1, plateau learning-rate halving, and a best-snapshot guarantee."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import layers, metrics
from .data import SignalDataset
from .errors import ConfigError, DivergenceError, LabelError, ShapeError
from .network import (
    NetworkParams,
    decayed_param_names,
    iter_params,
    network_backward,
    network_forward,
)

PROB_FLOOR = 1e-12
IMPROVE_EPS = 1e-6  # strict increase below this is treated as noise


@dataclass
class TrainConfig:
    lr0: float = 0.0025
    weight_decay: float = 1e-4
    batch_size: int = 128
    max_epochs: int = 120
    patience: int = 10
    plateau_wait: int = 5
    lr_min: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.lr_min <= self.lr0:
            raise ConfigError("need 0 < lr_min <= lr0")
        if not self.patience >= self.plateau_wait >= 1:
            raise ConfigError("need patience >= plateau_wait >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_network(cls, net: NetworkParams) -> "AdamState":
        return cls(
            m={n: np.zeros_like(p) for n, p in iter_params(net)},
            v={n: np.zeros_like(p) for n, p in iter_params(net)},
        )


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float
    val_macro_f1: float
    lr: float
    events: list[str] = field(default_factory=list)


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_val_macro_f1(self) -> float:
        return max(e.val_macro_f1 for e in self.epochs)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood plus the fused softmax-CE logit gradient.

    probs rows must already sum to 1; the gradient returned is w.r.t. the
    logits that produced them: (probs - onehot) / B.
    """
    labels = np.asarray(labels, dtype=np.int64)
    b, k = probs.shape
    if labels.shape != (b,):
        raise ShapeError("labels must be one per probability row")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise LabelError(f"labels must lie in [0, {k})")
    picked = probs[np.arange(b), labels]
    loss = float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())
    grad = probs.copy()
    grad[np.arange(b), labels] -= 1.0
    grad /= b
    return loss, grad


def adam_step(
    net: NetworkParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
    lr: float | None = None,
) -> tuple[NetworkParams, AdamState]:
    """One Adam update in place; weight decay is coupled L2 on conv/dense
    weights only (biases and batch-norm parameters are exempt)."""
    if lr is None:
        lr = cfg.lr0
    decayed = decayed_param_names(net)
    state.t += 1
    bc1 = 1.0 - cfg.beta1**state.t
    bc2 = 1.0 - cfg.beta2**state.t
    for name, p in iter_params(net):
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        if cfg.weight_decay and name in decayed:
            g = g + cfg.weight_decay * p
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps_adam)
    return net, state


def _as_batches(n: int, batch_size: int, perm: np.ndarray):
    for start in range(0, n, batch_size):
        yield perm[start : start + batch_size]  # last partial batch kept


def _epoch_metrics(net: NetworkParams, ds: SignalDataset) -> tuple[float, float, float]:
    """Eval-mode loss, accuracy, macro-F1 on a dataset."""
    probs = metrics.predict_probs(net, ds)
    loss, _ = cross_entropy(probs, ds.labels)
    pred = probs.argmax(axis=1)
    cm = metrics.confusion_matrix(ds.labels, pred, ds.n_classes)
    return loss, metrics.accuracy(cm), metrics.macro_f1(cm)


def train(
    net: NetworkParams,
    train_ds: SignalDataset,
    val_ds: SignalDataset,
    cfg: TrainConfig,
) -> tuple[NetworkParams, TrainHistory]:
    """Optimize net on train_ds, early-stopping on validation macro-F1.

    Returns the best snapshot seen (never the final state) and the per-epoch
    history. Deterministic for a fixed cfg.seed: one rng drives both the
    epoch shuffles and the dropout masks.
    """
    if train_ds.n == 0 or val_ds.n == 0:
        raise ShapeError("train and validation datasets must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    state = AdamState.for_network(net)
    x_all = train_ds.segments[:, None, :]
    y_all = train_ds.labels

    history = TrainHistory()
    lr = cfg.lr0
    best_f1 = -math.inf
    best_snapshot = net.clone()
    stall = 0

    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(train_ds.n)
        loss_sum = 0.0
        for batch in _as_batches(train_ds.n, cfg.batch_size, perm):
            logits, cache = network_forward(net, x_all[batch], layers.TRAIN, rng)
            probs = layers.softmax(logits)
            loss, grad_logits = cross_entropy(probs, y_all[batch])
            if not math.isfinite(loss):
                raise DivergenceError(epoch)
            loss_sum += loss * batch.size
            grads = network_backward(net, cache, grad_logits)
            adam_step(net, grads, state, cfg, lr)

        val_loss, val_acc, val_f1 = _epoch_metrics(net, val_ds)
        record = EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / train_ds.n,
            val_loss=val_loss,
            val_acc=val_acc,
            val_macro_f1=val_f1,
            lr=lr,
        )
        history.epochs.append(record)

        if val_f1 >= best_f1 + IMPROVE_EPS:
            best_f1 = val_f1
            best_snapshot = net.clone()
            history.best_epoch = epoch
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                record.events.append("early-stop")
                break
            if stall % cfg.plateau_wait == 0 and lr > cfg.lr_min:
                lr = max(lr / 2.0, cfg.lr_min)
                record.events.append("lr-halved")

    history.epochs[-1].events.append("best-restored")
    return best_snapshot, history
