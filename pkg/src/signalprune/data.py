"""Segment loading, cleaning, standardization, stratified splitting, synthesis.

Datasets are N labeled 1D segments of a fixed length d with K classes.  The
on-disk format ("Segment-CSV") is UTF-8 with LF endings: a header line
``label,s0,s1,...,s{d-1}``, then one row per segment holding an integer label
followed by d decimal samples.  ``NaN`` is a legal sample token; rows carrying
non-finite samples survive loading and are dropped by :func:`clean`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateDatasetError,
    EmptyInputError,
    ParseError,
    ShapeError,
    StratificationError,
)

STD_EPS = 1e-8


@dataclass
class SignalDataset:
    """N fixed-length labeled segments. Treated as immutable once built."""

    segments: np.ndarray  # (N, d) float64
    labels: np.ndarray  # (N,) int64, values in [0, n_classes)
    n_classes: int

    def __post_init__(self):
        self.segments = np.asarray(self.segments, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.segments.ndim != 2:
            raise ShapeError(f"segments must be 2-D, got shape {self.segments.shape}")
        if self.labels.shape != (self.segments.shape[0],):
            raise ShapeError(
                f"{self.segments.shape[0]} segments but {self.labels.shape[0]} labels"
            )
        if self.n_classes < 1:
            raise ShapeError("n_classes must be >= 1")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ShapeError("labels must lie in [0, n_classes)")

    @property
    def n(self) -> int:
        return self.segments.shape[0]

    @property
    def d(self) -> int:
        return self.segments.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices: np.ndarray) -> "SignalDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return SignalDataset(self.segments[idx].copy(), self.labels[idx].copy(), self.n_classes)


@dataclass
class Scaler:
    """Per-feature standardization parameters fit on the training split only."""

    mean: np.ndarray
    std: np.ndarray  # every entry >= STD_EPS

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ShapeError("scaler mean/std must be 1-D and the same length")
        if np.any(self.std <= 0):
            raise ShapeError("scaler std entries must be strictly positive")

    @property
    def d(self) -> int:
        return self.mean.shape[0]


@dataclass
class SplitRatios:
    train: float = 0.64
    val: float = 0.16
    test: float = 0.20

    def __post_init__(self):
        for name, r in (("train", self.train), ("val", self.val), ("test", self.test)):
            if not 0.0 < r < 1.0:
                raise ShapeError(f"{name} ratio must be in (0, 1), got {r}")
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ShapeError("split ratios must sum to 1")


@dataclass
class SynthConfig:
    """Desk-scale synthetic dataset: class-indexed waveforms plus Gaussian noise."""

    n_per_class: int = 400
    d: int = 178
    n_classes: int = 3
    noise_sigma: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_per_class < 1:
            raise ShapeError("n_per_class must be >= 1")
        if self.n_classes < 2:
            raise ShapeError("n_classes must be >= 2")
        if self.d < 8:
            raise ShapeError("segment length must be >= 8")


def load_dataset(path: str | Path) -> SignalDataset:
    """Parse a Segment-CSV file. Non-finite samples are kept for clean()."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise EmptyInputError(f"{path}: empty file")

    header = lines[0].split(",")
    if len(header) < 2 or header[0] != "label":
        raise ParseError(1, "header must be 'label,s0,...,s{d-1}'")
    d = len(header) - 1

    rows = lines[1:]
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")

    segments = np.empty((len(rows), d), dtype=np.float64)
    labels = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        line_no = i + 2
        fields = row.split(",")
        if len(fields) != d + 1:
            raise ParseError(line_no, f"expected {d + 1} columns, got {len(fields)}")
        try:
            label = int(fields[0])
        except ValueError:
            raise ParseError(line_no, f"label {fields[0]!r} is not an integer") from None
        if label < 0:
            raise ParseError(line_no, f"label {label} is negative")
        labels[i] = label
        try:
            segments[i] = [float(f) for f in fields[1:]]
        except ValueError as exc:
            raise ParseError(line_no, f"bad sample value ({exc})") from None

    return SignalDataset(segments, labels, int(labels.max()) + 1)


def save_dataset(ds: SignalDataset, path: str | Path) -> None:
    """Write Segment-CSV. repr() keeps float64 samples exact on round trip."""
    path = Path(path)
    header = "label," + ",".join(f"s{i}" for i in range(ds.d))
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for label, row in zip(ds.labels, ds.segments):
            fh.write(f"{int(label)}," + ",".join(repr(float(v)) for v in row) + "\n")


def clean(ds: SignalDataset) -> SignalDataset:
    """Drop every row with a non-finite sample; labels filtered in lockstep."""
    keep = np.isfinite(ds.segments).all(axis=1)
    out = SignalDataset(ds.segments[keep].copy(), ds.labels[keep].copy(), ds.n_classes)
    if out.n == 0:
        raise DegenerateDatasetError("no finite rows left after cleaning")
    missing = np.flatnonzero(out.class_counts() == 0)
    if missing.size:
        raise DegenerateDatasetError(f"classes {missing.tolist()} vanished during cleaning")
    return out


def standardize_fit(train: SignalDataset) -> Scaler:
    """Per-feature mean and population std over the training rows.

    Stds are clamped below at STD_EPS so constant features stay dividable.
    """
    if train.n == 0:
        raise EmptyInputError("cannot fit a scaler on an empty dataset")
    if not np.isfinite(train.segments).all():
        raise ShapeError("scaler requires a cleaned (all-finite) dataset")
    mean = train.segments.mean(axis=0)
    std = np.maximum(train.segments.std(axis=0), STD_EPS)
    return Scaler(mean, std)


def standardize_apply(ds: SignalDataset, scaler: Scaler) -> SignalDataset:
    if ds.d != scaler.d:
        raise ShapeError(f"dataset has d={ds.d} but scaler has d={scaler.d}")
    return SignalDataset((ds.segments - scaler.mean) / scaler.std, ds.labels.copy(), ds.n_classes)


def stratified_split_indices(
    labels: np.ndarray, n_classes: int, ratios: SplitRatios, seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row indices of the train/val/test partition.

    Per class with n_c members: floor(train*n_c) rows to train, floor(val*n_c)
    to val, the remainder to test, assigned in a seed-deterministic shuffled
    order.  The 1e-9 guard absorbs float artifacts like 1/3 * 3 < 1.
    """
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    train_idx: list[np.ndarray] = []
    val_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    for c in range(n_classes):
        members = np.flatnonzero(labels == c)
        if members.size < 3:
            raise StratificationError(f"class {c} has {members.size} members; need >= 3")
        members = rng.permutation(members)
        n_train = math.floor(ratios.train * members.size + 1e-9)
        n_val = math.floor(ratios.val * members.size + 1e-9)
        train_idx.append(members[:n_train])
        val_idx.append(members[n_train : n_train + n_val])
        test_idx.append(members[n_train + n_val :])
    return (
        np.concatenate(train_idx),
        np.concatenate(val_idx),
        np.concatenate(test_idx),
    )


def stratified_split(
    ds: SignalDataset, ratios: SplitRatios, seed: int
) -> tuple[SignalDataset, SignalDataset, SignalDataset]:
    tr, va, te = stratified_split_indices(ds.labels, ds.n_classes, ratios, seed)
    return ds.subset(tr), ds.subset(va), ds.subset(te)


def class_waveform(c: int, d: int) -> np.ndarray:
    """Deterministic template for class c: class-indexed sinusoid plus a burst."""
    t = np.arange(d, dtype=np.float64)
    wave = np.sin(2.0 * np.pi * (c + 1) * 2.0 * t / d)
    center = d * (c + 1.5) / 6.0
    width = d / 16.0
    burst = (0.8 + 0.4 * c) * np.exp(-0.5 * ((t - center) / width) ** 2)
    return wave + burst


def synth_generate(cfg: SynthConfig) -> SignalDataset:
    """Seed-deterministic learnable dataset: template(c) + N(0, noise_sigma^2)."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_per_class * cfg.n_classes
    segments = np.empty((n, cfg.d), dtype=np.float64)
    labels = np.empty(n, dtype=np.int64)
    row = 0
    for c in range(cfg.n_classes):
        template = class_waveform(c, cfg.d)
        noise = rng.normal(0.0, 1.0, size=(cfg.n_per_class, cfg.d))
        segments[row : row + cfg.n_per_class] = template + cfg.noise_sigma * noise
        labels[row : row + cfg.n_per_class] = c
        row += cfg.n_per_class
    return SignalDataset(segments, labels, cfg.n_classes)
