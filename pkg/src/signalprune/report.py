"""Baseline-vs-pruned comparison rendering and plot-data CSV export."""

from __future__ import annotations

from pathlib import Path

from .errors import ShapeError
from .metrics import EvalReport
from .train import TrainHistory


def fmt_accuracy_pct(acc: float) -> str:
    return f"{acc * 100.0:.2f}"


def fmt_macro_f1(f1: float) -> str:
    return f"{f1:.4f}"


def fmt_kernels_pct(pct: float) -> str:
    return f"{pct:g}%"


def comparison_markdown(baseline: EvalReport, pruned: EvalReport) -> str:
    """Table-shaped comparison: model, accuracy %, macro F1, kernels %.

    Baseline row first, pruned second, then the pruned-minus-baseline delta.
    """
    if len(baseline.confusion) != len(pruned.confusion):
        raise ShapeError("reports disagree on the class count")
    d_acc = (pruned.accuracy - baseline.accuracy) * 100.0
    d_f1 = pruned.macro_f1 - baseline.macro_f1
    d_kernels = pruned.kernels_retained_pct - baseline.kernels_retained_pct
    lines = [
        "# Baseline vs Pruned Comparison",
        "",
        "| Model | Accuracy (%) | Macro F1 | Kernels (%) |",
        "|-------|--------------|----------|-------------|",
        f"| Baseline | {fmt_accuracy_pct(baseline.accuracy)} | {fmt_macro_f1(baseline.macro_f1)} "
        f"| {fmt_kernels_pct(baseline.kernels_retained_pct)} |",
        f"| Pruned | {fmt_accuracy_pct(pruned.accuracy)} | {fmt_macro_f1(pruned.macro_f1)} "
        f"| {fmt_kernels_pct(pruned.kernels_retained_pct)} |",
        f"| Delta (pruned - baseline) | {d_acc:+.2f} | {d_f1:+.4f} | {d_kernels:+g}% |",
        "",
        f"Inference time (s / 1000 segments): baseline {baseline.inference_sec_per_1000:.4f}, "
        f"pruned {pruned.inference_sec_per_1000:.4f}",
        "",
    ]
    return "\n".join(lines)


def loss_curves_csv(baseline: TrainHistory, pruned: TrainHistory) -> str:
    """Per-epoch loss columns for external plotting; short runs leave blanks."""
    header = "epoch,baseline_train_loss,baseline_val_loss,pruned_train_loss,pruned_val_loss"
    rows = [header]
    n = max(len(baseline.epochs), len(pruned.epochs))
    for i in range(n):
        cells = [str(i + 1)]
        for hist in (baseline, pruned):
            if i < len(hist.epochs):
                cells += [repr(hist.epochs[i].train_loss), repr(hist.epochs[i].val_loss)]
            else:
                cells += ["", ""]
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"


def write_comparison(
    baseline: EvalReport,
    pruned: EvalReport,
    out_dir: str | Path,
    baseline_history: TrainHistory | None = None,
    pruned_history: TrainHistory | None = None,
) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "comparison.md").write_text(comparison_markdown(baseline, pruned), encoding="utf-8")
    baseline.write_confusion_csv(out_dir / "confusion_baseline.csv")
    pruned.write_confusion_csv(out_dir / "confusion_pruned.csv")
    if baseline_history is not None and pruned_history is not None:
        (out_dir / "loss_curves.csv").write_text(
            loss_curves_csv(baseline_history, pruned_history), encoding="utf-8"
        )
