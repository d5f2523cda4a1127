"""Model and history persistence.

A model is a directory holding `manifest.json` (schema version, architecture
tuple, record order with shapes, CRC-32 of the blob) and `params.bin` (every
record concatenated in manifest order as 32-bit little-endian IEEE-754).
Batch-norm running statistics ride along so a loaded model is immediately
evaluable. `history.csv` carries one row per training epoch.
"""

from __future__ import annotations

import csv
import json
import zlib
from pathlib import Path

import numpy as np

from .errors import CorruptModelError
from .layers import BatchNormParams, ConvParams, DenseParams
from .network import Architecture, Block, NetworkParams
from .train import EpochRecord, TrainHistory

SCHEMA_VERSION = 1
HISTORY_COLUMNS = ["epoch", "train_loss", "val_loss", "val_acc", "val_macro_f1", "lr", "event"]


def _records(net: NetworkParams) -> list[tuple[str, np.ndarray]]:
    """Everything that goes into the blob, running stats included."""
    out: list[tuple[str, np.ndarray]] = []
    for i, b in enumerate(net.blocks):
        out.append((f"conv{i}.weights", b.conv.weights))
        out.append((f"conv{i}.bias", b.conv.bias))
        out.append((f"bn{i}.gamma", b.bn.gamma))
        out.append((f"bn{i}.beta", b.bn.beta))
        out.append((f"bn{i}.running_mean", b.bn.running_mean))
        out.append((f"bn{i}.running_var", b.bn.running_var))
    out.append(("dense.weights", net.dense.weights))
    out.append(("dense.bias", net.dense.bias))
    return out


def save_model(net: NetworkParams, model_dir: str | Path) -> None:
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    records = _records(net)
    blob = b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for _, a in records)
    b0 = net.blocks[0]
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "architecture": list(net.architecture().as_tuple()),
        "bn_momentum": b0.bn.momentum,
        "bn_eps": b0.bn.eps,
        "pool_width": b0.pool_width,
        "records": [{"name": n, "shape": list(a.shape)} for n, a in records],
        "crc32": zlib.crc32(blob),
    }
    (model_dir / "params.bin").write_bytes(blob)
    (model_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def load_model(model_dir: str | Path) -> NetworkParams:
    model_dir = Path(model_dir)
    manifest_path = model_dir / "manifest.json"
    blob_path = model_dir / "params.bin"
    if not manifest_path.is_file() or not blob_path.is_file():
        raise CorruptModelError(f"{model_dir} is missing manifest.json or params.bin")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorruptModelError(f"unreadable manifest: {exc}") from None
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise CorruptModelError(f"unsupported schema version {manifest.get('schema_version')}")

    blob = blob_path.read_bytes()
    if zlib.crc32(blob) != manifest.get("crc32"):
        raise CorruptModelError("params.bin checksum mismatch")

    try:
        arch = Architecture(*manifest["architecture"])
        record_layout = [(r["name"], tuple(r["shape"])) for r in manifest["records"]]
    except (KeyError, TypeError) as exc:
        raise CorruptModelError(f"malformed manifest: {exc}") from None

    expected = sum(int(np.prod(shape)) for _, shape in record_layout) * 4
    if len(blob) != expected:
        raise CorruptModelError(f"params.bin holds {len(blob)} bytes, expected {expected}")

    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in record_layout:
        n = int(np.prod(shape))
        arrays[name] = (
            np.frombuffer(blob, dtype="<f4", count=n, offset=offset)
            .astype(np.float64)
            .reshape(shape)
        )
        offset += n * 4

    try:
        blocks = []
        for i in range(3):
            conv = ConvParams(weights=arrays[f"conv{i}.weights"], bias=arrays[f"conv{i}.bias"])
            bn = BatchNormParams(
                gamma=arrays[f"bn{i}.gamma"],
                beta=arrays[f"bn{i}.beta"],
                running_mean=arrays[f"bn{i}.running_mean"],
                running_var=arrays[f"bn{i}.running_var"],
                momentum=manifest.get("bn_momentum", 0.1),
                eps=manifest.get("bn_eps", 1e-8),
            )
            blocks.append(
                Block(conv=conv, bn=bn, p_drop=arch.p_drop, pool_width=manifest.get("pool_width", 2))
            )
        dense = DenseParams(weights=arrays["dense.weights"], bias=arrays["dense.bias"])
        return NetworkParams(blocks=blocks, dense=dense, d=arch.d)
    except KeyError as exc:
        raise CorruptModelError(f"manifest is missing record {exc}") from None


def save_history(history: TrainHistory, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for e in history.epochs:
            writer.writerow(
                [
                    e.epoch,
                    repr(e.train_loss),
                    repr(e.val_loss),
                    repr(e.val_acc),
                    repr(e.val_macro_f1),
                    repr(e.lr),
                    ";".join(e.events),
                ]
            )


def load_history(path: str | Path) -> TrainHistory:
    history = TrainHistory()
    with Path(path).open("r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != HISTORY_COLUMNS:
            raise CorruptModelError(f"unexpected history columns {header}")
        for row in reader:
            history.epochs.append(
                EpochRecord(
                    epoch=int(row[0]),
                    train_loss=float(row[1]),
                    val_loss=float(row[2]),
                    val_acc=float(row[3]),
                    val_macro_f1=float(row[4]),
                    lr=float(row[5]),
                    events=row[6].split(";") if row[6] else [],
                )
            )
    if history.epochs:
        best = max(history.epochs, key=lambda e: e.val_macro_f1)
        history.best_epoch = best.epoch
    return history
