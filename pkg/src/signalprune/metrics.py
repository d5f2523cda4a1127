"""Confusion matrix and the scalar evaluation metrics.

Conventions: counts[i][j] is the number of samples of true class i predicted
as class j; any 0/0 in precision/recall/F1 is defined as 0; argmax prediction
ties resolve to the lowest class index.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import layers
from .data import SignalDataset
from .errors import EmptyInputError, LabelError, ShapeError
from .network import NetworkParams, network_forward

EVAL_BATCH = 256
TIMING_REPS = 5


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ShapeError("y_true and y_pred must be 1-D and the same length")
    for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise LabelError(f"{name} holds labels outside [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return counts


def accuracy(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        raise EmptyInputError("cannot compute accuracy of an empty confusion matrix")
    return float(np.trace(counts) / total)


def per_class_prf(counts: np.ndarray) -> list[tuple[float, float, float]]:
    """(precision, recall, f1) per class; 0/0 cases are 0 by convention."""
    if counts.sum() == 0:
        raise EmptyInputError("cannot score an empty confusion matrix")
    out = []
    for k in range(counts.shape[0]):
        tp = float(counts[k, k])
        fp = float(counts[:, k].sum() - counts[k, k])
        fn = float(counts[k, :].sum() - counts[k, k])
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        out.append((precision, recall, f1))
    return out


def macro_f1(counts: np.ndarray) -> float:
    prf = per_class_prf(counts)
    return float(sum(f1 for _, _, f1 in prf) / len(prf))


def predict_probs(net: NetworkParams, ds: SignalDataset) -> np.ndarray:
    """Eval-mode class probabilities, batched to bound memory."""
    if ds.d != net.d:
        raise ShapeError(f"dataset has d={ds.d} but network expects d={net.d}")
    chunks = []
    for start in range(0, ds.n, EVAL_BATCH):
        x = ds.segments[start : start + EVAL_BATCH, None, :]
        logits, _ = network_forward(net, x, layers.EVAL)
        chunks.append(layers.softmax(logits))
    return np.concatenate(chunks, axis=0)


@dataclass
class EvalReport:
    accuracy: float
    per_class: list[dict]  # [{precision, recall, f1}, ...] by class index
    macro_f1: float
    confusion: list[list[int]]
    kernels_retained_pct: float
    inference_sec_per_1000: float
    n_eval: int = 0

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.__dict__, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path: str | Path) -> "EvalReport":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))

    def write_confusion_csv(self, path: str | Path) -> None:
        # K rows x K columns, truth-major
        lines = [",".join(str(v) for v in row) for row in self.confusion]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def evaluate(net: NetworkParams, ds: SignalDataset, kernels_retained_pct: float = 100.0) -> EvalReport:
    """Assemble all metrics plus median-of-5 inference timing per 1000 segments."""
    if ds.n == 0:
        raise EmptyInputError("cannot evaluate on an empty dataset")
    probs = predict_probs(net, ds)
    pred = probs.argmax(axis=1)  # lowest index wins exact ties
    counts = confusion_matrix(ds.labels, pred, ds.n_classes)
    prf = per_class_prf(counts)

    times = []
    for _ in range(TIMING_REPS):
        t0 = time.perf_counter()
        predict_probs(net, ds)
        times.append(time.perf_counter() - t0)
    per_1000 = float(np.median(times) * 1000.0 / ds.n)

    return EvalReport(
        accuracy=accuracy(counts),
        per_class=[{"precision": p, "recall": r, "f1": f} for p, r, f in prf],
        macro_f1=macro_f1(counts),
        confusion=counts.tolist(),
        kernels_retained_pct=float(kernels_retained_pct),
        inference_sec_per_1000=per_1000,
        n_eval=ds.n,
    )
