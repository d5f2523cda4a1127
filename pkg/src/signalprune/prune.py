"""L1 kernel scoring, retained-set selection, channel-aligned rebuild,
and the prune-then-retrain driver.

A kernel's score is the sum of absolute weight values over its full
(C_in x k) slab, bias excluded. The top max(1, ceil(ratio * n)) kernels per
layer survive, ties breaking toward the lower index. Rebuilding slices the
retained output channels, the matching batch-norm records, the next layer's
input channels, and finally the dense layer's input columns; every surviving
value is copied verbatim, so the pruned net is immediately evaluable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import SignalDataset
from .errors import ConfigError, DecisionError
from .layers import BatchNormParams, ConvParams, DenseParams
from .network import Block, NetworkParams, init_network
from .train import TrainConfig, TrainHistory, train


def kernel_scores(layer: ConvParams) -> np.ndarray:
    """Per-kernel L1 importance: s_j = sum_i sum_t |w[j, i, t]|."""
    return np.abs(layer.weights).sum(axis=(1, 2))


def select_keep(scores: np.ndarray, ratio: float) -> list[int]:
    """Indices of the max(1, ceil(ratio*n)) highest-scoring kernels, sorted."""
    if not 0.0 < ratio <= 1.0:
        raise ConfigError(f"retention ratio must lie in (0, 1], got {ratio}")
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    n_keep = max(1, math.ceil(ratio * n - 1e-12))
    # stable sort on negatives: descending score, ties toward the lower index
    order = np.argsort(-scores, kind="stable")
    return sorted(int(i) for i in order[:n_keep])


@dataclass
class PruneDecision:
    keep: list[list[int]]  # per conv layer, strictly increasing indices
    ratio: float
    scores: list[list[float]]  # provenance: the L1 scores the keep sets came from

    def widths(self) -> list[int]:
        return [len(k) for k in self.keep]

    def to_json(self, path: str | Path) -> None:
        payload = {
            "ratio": self.ratio,
            "layers": [
                {"scores": s, "retained": k, "width": len(k)}
                for s, k in zip(self.scores, self.keep)
            ],
            "widths": self.widths(),
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def decide(net: NetworkParams, ratio: float) -> PruneDecision:
    """Score every conv layer of a trained net and pick the retained sets."""
    scores = [kernel_scores(b.conv) for b in net.blocks]
    keep = [select_keep(s, ratio) for s in scores]
    return PruneDecision(keep=keep, ratio=ratio, scores=[s.tolist() for s in scores])


def rebuild_pruned(net: NetworkParams, decision: PruneDecision) -> NetworkParams:
    """Channel-aligned smaller network containing only the retained kernels."""
    if len(decision.keep) != len(net.blocks):
        raise DecisionError(
            f"decision covers {len(decision.keep)} layers, network has {len(net.blocks)}"
        )
    for l, (keep, b) in enumerate(zip(decision.keep, net.blocks)):
        if not keep:
            raise ConfigError(f"layer {l} keep set is empty")
        if sorted(set(keep)) != list(keep):
            raise DecisionError(f"layer {l} keep set must be strictly increasing and unique")
        if keep[0] < 0 or keep[-1] >= b.conv.c_out:
            raise DecisionError(f"layer {l} keep indices exceed its {b.conv.c_out} kernels")

    blocks = []
    prev_keep = [0]  # block 0 consumes the single input channel
    for b, keep in zip(net.blocks, decision.keep):
        conv = ConvParams(
            weights=b.conv.weights[np.ix_(keep, prev_keep)].copy(),
            bias=b.conv.bias[keep].copy(),
        )
        bn = BatchNormParams(
            gamma=b.bn.gamma[keep].copy(),
            beta=b.bn.beta[keep].copy(),
            running_mean=b.bn.running_mean[keep].copy(),
            running_var=b.bn.running_var[keep].copy(),
            momentum=b.bn.momentum,
            eps=b.bn.eps,
        )
        blocks.append(Block(conv=conv, bn=bn, p_drop=b.p_drop, pool_width=b.pool_width))
        prev_keep = keep
    dense = DenseParams(
        weights=net.dense.weights[:, prev_keep].copy(),
        bias=net.dense.bias.copy(),
    )
    return NetworkParams(blocks=blocks, dense=dense, d=net.d)


def retention_rate(original: NetworkParams, pruned: NetworkParams) -> float:
    """Kernels retained, percent: 100 * pruned kernel count / original count."""
    if len(original.blocks) != len(pruned.blocks):
        raise DecisionError("networks have different layer counts")
    return 100.0 * pruned.n_kernels / original.n_kernels


def prune_and_retrain(
    net: NetworkParams,
    train_ds: SignalDataset,
    val_ds: SignalDataset,
    cfg: TrainConfig,
    ratio: float = 0.5,
    reinit: bool = False,
) -> tuple[NetworkParams, TrainHistory, PruneDecision]:
    """Score -> select -> rebuild -> retrain with the identical TrainConfig.

    Retraining warm-starts from the surviving baseline weights; reinit=True
    re-initializes the pruned architecture from scratch instead.
    """
    decision = decide(net, ratio)
    pruned = rebuild_pruned(net, decision)
    if reinit:
        pruned = init_network(pruned.architecture(), cfg.seed)
    best, history = train(pruned, train_ds, val_ds, cfg)
    return best, history, decision
