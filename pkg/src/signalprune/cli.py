"""Command-line workflow: synth -> train -> prune -> eval -> report.

Every run directory doubles as a model directory (manifest.json, params.bin)
and additionally persists the training scaler, the split indices, the epoch
history, and a run manifest, so baseline and pruned models are always
evaluated on the identical held-out test rows with the identical scaler.

Exit codes: 0 success, 2 usage, 3 input/state error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, data, layers, metrics, model_io, prune, report
from .data import SignalDataset, Scaler, SplitRatios
from .errors import DivergenceError, InputError
from .network import Architecture, init_network, network_forward
from .train import TrainConfig, TrainHistory, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4


# --- config / manifest plumbing ----------------------------------------------

def load_train_config(path: str | None, seed: int | None, overrides: dict) -> TrainConfig:
    """TrainConfig from defaults, then a TOML/JSON file, then explicit flags."""
    values: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise InputError(f"config file not found: {p}")
        if p.suffix.lower() == ".json":
            values = json.loads(p.read_text(encoding="utf-8"))
        else:
            import tomli

            values = tomli.loads(p.read_text(encoding="utf-8"))
        known = {f.name for f in dataclasses.fields(TrainConfig)}
        unknown = set(values) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
    if seed is not None:
        values["seed"] = seed
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    try:
        return TrainConfig(**values)
    except TypeError as exc:
        raise InputError(f"bad config: {exc}") from None


def write_run_manifest(out_dir: Path, payload: dict) -> None:
    payload = dict(payload)
    payload["tool_version"] = __version__
    payload["created_utc"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    (out_dir / "run.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_run_manifest(run_dir: Path) -> dict:
    p = run_dir / "run.json"
    if not p.is_file():
        raise InputError(f"{run_dir} has no run.json (not a run directory?)")
    return json.loads(p.read_text(encoding="utf-8"))


def save_scaler(scaler: Scaler, path: Path) -> None:
    payload = {"mean": scaler.mean.tolist(), "std": scaler.std.tolist()}
    path.write_text(json.dumps(payload) + "\n", encoding="utf-8")


def load_scaler(path: Path) -> Scaler:
    if not path.is_file():
        raise InputError(f"scaler file not found: {path}")
    raw = json.loads(path.read_text(encoding="utf-8"))
    return Scaler(np.array(raw["mean"]), np.array(raw["std"]))


def save_splits(path: Path, seed: int, ratios: SplitRatios, idx) -> None:
    tr, va, te = idx
    payload = {
        "seed": seed,
        "ratios": [ratios.train, ratios.val, ratios.test],
        "train": tr.tolist(),
        "val": va.tolist(),
        "test": te.tolist(),
    }
    path.write_text(json.dumps(payload) + "\n", encoding="utf-8")


def load_splits(path: Path) -> dict:
    if not path.is_file():
        raise InputError(f"splits file not found: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def prepared_splits(dataset_path: str, scaler: Scaler, splits: dict) -> tuple[SignalDataset, SignalDataset, SignalDataset]:
    """Clean + scale the dataset and slice the persisted index sets."""
    ds = data.clean(data.load_dataset(dataset_path))
    scaled = data.standardize_apply(ds, scaler)
    return tuple(scaled.subset(np.array(splits[k], dtype=np.int64)) for k in ("train", "val", "test"))


# --- commands -----------------------------------------------------------------

def cmd_synth(args) -> None:
    cfg = data.SynthConfig(
        n_per_class=args.per_class,
        d=args.length,
        n_classes=args.classes,
        noise_sigma=args.noise,
        seed=args.seed if args.seed is not None else 0,
    )
    ds = data.synth_generate(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    data.save_dataset(ds, out)
    print(f"wrote {ds.n} segments (d={ds.d}, K={ds.n_classes}) to {out}")


def cmd_train(args) -> None:
    cfg = load_train_config(
        args.config,
        args.seed,
        {"max_epochs": args.max_epochs, "batch_size": args.batch_size, "lr0": args.lr},
    )
    widths = tuple(int(w) for w in args.widths.split(","))
    if len(widths) != 3:
        raise InputError(f"--widths needs three comma-separated values, got {args.widths!r}")

    ds = data.clean(data.load_dataset(args.data))
    ratios = SplitRatios()
    idx = data.stratified_split_indices(ds.labels, ds.n_classes, ratios, cfg.seed)
    train_raw = ds.subset(idx[0])
    scaler = data.standardize_fit(train_raw)
    scaled = data.standardize_apply(ds, scaler)
    train_ds, val_ds = scaled.subset(idx[0]), scaled.subset(idx[1])

    arch = Architecture(
        *widths, k=args.kernel_size, p_drop=args.dropout, d=ds.d, n_classes=ds.n_classes
    )
    net = init_network(arch, cfg.seed)
    best, history = train(net, train_ds, val_ds, cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_io.save_model(best, out)
    save_scaler(scaler, out / "scaler.json")
    save_splits(out / "splits.json", cfg.seed, ratios, idx)
    model_io.save_history(history, out / "history.csv")
    write_run_manifest(
        out,
        {
            "kind": "train",
            "dataset": str(Path(args.data).resolve()),
            "seed": cfg.seed,
            "train_config": dataclasses.asdict(cfg),
            "architecture": list(best.architecture().as_tuple()),
            "ratio": None,
            "kernels_retained_pct": 100.0,
            "best_epoch": history.best_epoch,
            "artifacts": ["manifest.json", "params.bin", "scaler.json", "splits.json", "history.csv"],
        },
    )
    print(
        f"trained {len(history.epochs)} epochs (best epoch {history.best_epoch}, "
        f"val macro-F1 {history.best_val_macro_f1:.4f}); model in {out}"
    )


def verify_masked_equivalence(baseline, decision, pruned, d: int, seed: int = 0) -> float:
    """Max |logit difference| between the pruned net and the zero-masked original."""
    masked = baseline.clone()
    for l, keep in enumerate(decision.keep):
        dropped = sorted(set(range(baseline.blocks[l].conv.c_out)) - set(keep))
        if not dropped:
            continue
        if l + 1 < len(masked.blocks):
            masked.blocks[l + 1].conv.weights[:, dropped, :] = 0.0
        else:
            masked.dense.weights[:, dropped] = 0.0
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(10):
        x = rng.normal(size=(5, 1, d))
        a, _ = network_forward(pruned, x, layers.EVAL)
        b, _ = network_forward(masked, x, layers.EVAL)
        worst = max(worst, float(np.abs(a - b).max()))
    return worst


def cmd_prune(args) -> None:
    model_dir = Path(args.model)
    manifest = read_run_manifest(model_dir)
    baseline = model_io.load_model(model_dir)
    scaler = load_scaler(model_dir / "scaler.json")
    splits = load_splits(model_dir / "splits.json")
    dataset_path = args.data or manifest["dataset"]
    if not Path(dataset_path).is_file():
        raise InputError(f"dataset not found: {dataset_path} (pass --data to relocate)")

    if args.config is not None:
        cfg = load_train_config(args.config, args.seed, {})
    else:
        cfg = TrainConfig(**manifest["train_config"])  # identical retraining conditions
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)

    train_ds, val_ds, _ = prepared_splits(dataset_path, scaler, splits)
    best, history, decision = prune.prune_and_retrain(
        baseline, train_ds, val_ds, cfg, ratio=args.ratio, reinit=args.reinit
    )
    rebuilt = prune.rebuild_pruned(baseline, decision)
    retained_pct = prune.retention_rate(baseline, rebuilt)

    if args.verify:
        worst = verify_masked_equivalence(baseline, decision, rebuilt, baseline.d, cfg.seed)
        if worst > 1e-10:
            raise InputError(f"masked-equivalence check failed: max deviation {worst:.3e}")
        print(f"masked-equivalence check passed (max deviation {worst:.3e})")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_io.save_model(best, out)
    decision.to_json(out / "prune.json")
    save_scaler(scaler, out / "scaler.json")
    (out / "splits.json").write_text((model_dir / "splits.json").read_text(encoding="utf-8"), encoding="utf-8")
    model_io.save_history(history, out / "history.csv")
    write_run_manifest(
        out,
        {
            "kind": "prune",
            "dataset": str(Path(dataset_path).resolve()),
            "seed": cfg.seed,
            "train_config": dataclasses.asdict(cfg),
            "architecture": list(best.architecture().as_tuple()),
            "ratio": args.ratio,
            "kernels_retained_pct": retained_pct,
            "baseline": str(model_dir.resolve()),
            "best_epoch": history.best_epoch,
            "artifacts": [
                "manifest.json", "params.bin", "prune.json",
                "scaler.json", "splits.json", "history.csv",
            ],
        },
    )
    print(
        f"pruned to widths {list(best.widths)} ({retained_pct:g}% kernels retained), "
        f"retrained {len(history.epochs)} epochs; model in {out}"
    )


def cmd_eval(args) -> None:
    model_dir = Path(args.model)
    manifest = read_run_manifest(model_dir)
    net = model_io.load_model(model_dir)
    scaler = load_scaler(model_dir / "scaler.json")
    splits = load_splits(model_dir / "splits.json")
    dataset_path = args.data or manifest["dataset"]
    if not Path(dataset_path).is_file():
        raise InputError(f"dataset not found: {dataset_path} (pass --data to relocate)")

    _, _, test_ds = prepared_splits(dataset_path, scaler, splits)
    rep = metrics.evaluate(net, test_ds, kernels_retained_pct=manifest.get("kernels_retained_pct", 100.0))

    out = Path(args.out) if args.out else model_dir
    out.mkdir(parents=True, exist_ok=True)
    rep.to_json(out / "report.json")
    rep.write_confusion_csv(out / "confusion.csv")
    print(
        f"test accuracy {rep.accuracy:.4f}, macro-F1 {rep.macro_f1:.4f}, "
        f"kernels {rep.kernels_retained_pct:g}% -> {out / 'report.json'}"
    )


def cmd_report(args) -> None:
    baseline = metrics.EvalReport.from_json(args.baseline)
    pruned = metrics.EvalReport.from_json(args.pruned)
    histories: list[TrainHistory | None] = [None, None]
    for slot, path in enumerate((args.baseline_history, args.pruned_history)):
        if path is not None:
            histories[slot] = model_io.load_history(path)
    out = Path(args.out)
    report.write_comparison(baseline, pruned, out, histories[0], histories[1])
    print(f"comparison written to {out / 'comparison.md'}")


# --- argument parsing -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signalprune",
        description="Train, prune, and compare lightweight 1D conv classifiers.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic Segment-CSV dataset")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=int, default=400)
    p.add_argument("--length", type=int, default=178)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the baseline network")
    p.add_argument("--data", required=True, help="Segment-CSV dataset")
    p.add_argument("--out", required=True, help="run directory to create")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="TOML or JSON TrainConfig overrides")
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--widths", default="16,32,64", help="conv channel widths c1,c2,c3")
    p.add_argument("--kernel-size", type=int, default=5)
    p.add_argument("--dropout", type=float, default=0.3)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("prune", help="prune a trained model and retrain it")
    p.add_argument("--model", required=True, help="baseline run directory")
    p.add_argument("--out", required=True, help="run directory for the pruned model")
    p.add_argument("--ratio", type=float, default=0.5, help="kernel retention fraction")
    p.add_argument("--data", default=None, help="override the recorded dataset path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--reinit", action="store_true", help="re-initialize instead of warm start")
    p.add_argument("--verify", action="store_true", help="run the masked-equivalence check")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("eval", help="evaluate a model on its held-out test split")
    p.add_argument("--model", required=True, help="run directory")
    p.add_argument("--data", default=None, help="override the recorded dataset path")
    p.add_argument("--out", default=None, help="output directory (default: the run directory)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="compare two evaluation reports")
    p.add_argument("--baseline", required=True, help="baseline report.json")
    p.add_argument("--pruned", required=True, help="pruned report.json")
    p.add_argument("--baseline-history", default=None)
    p.add_argument("--pruned-history", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (InputError, FileNotFoundError, IsADirectoryError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DivergenceError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
