"""Dataset loading, min-max normalization and one-hot targets."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray  # N x n features
    Y: np.ndarray  # N x m one-hot targets
    class_names: tuple[str, ...]
    feature_ranges: np.ndarray | None = None  # n x 2 (min, max), set by normalize
    name: str = ""

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        Y = np.asarray(self.Y, dtype=np.float64)
        if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0] or X.shape[0] < 1:
            raise ValueError(f"inconsistent dataset shapes X{X.shape} Y{Y.shape}")
        if not np.isfinite(X).all():
            raise ValueError("features contain NaN or Inf")
        if not (((Y == 0.0) | (Y == 1.0)).all() and (Y.sum(axis=1) == 1.0).all()):
            raise ValueError("targets are not one-hot")
        if len(self.class_names) != Y.shape[1]:
            raise ValueError("class_names does not match target columns")
        for arr in (X, Y):
            arr.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return self.Y.shape[1]

    @property
    def labels(self) -> list[str]:
        return [self.class_names[k] for k in self.Y.argmax(axis=1)]

    def describe(self) -> dict:
        return {
            "name": self.name,
            "N": self.n_samples,
            "n": self.n_features,
            "m": self.n_classes,
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if (self.feature_ranges is None) != (other.feature_ranges is None):
            return False
        return (
            self.class_names == other.class_names
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.Y, other.Y)
            and (
                self.feature_ranges is None
                or np.array_equal(self.feature_ranges, other.feature_ranges)
            )
        )


def one_hot(labels: Sequence[str]) -> tuple[np.ndarray, tuple[str, ...]]:
    """Encode labels with classes ordered by first appearance."""
    index: dict[str, int] = {}
    codes = [index.setdefault(lab, len(index)) for lab in labels]
    Y = np.zeros((len(codes), max(len(index), 1)))
    Y[np.arange(len(codes)), codes] = 1.0
    return Y, tuple(index)


def _parse_float(cell: str, row: int, col: int) -> float:
    text = cell.strip()
    if not text:
        raise DataFormatError(f"missing value at row {row}, column {col}")
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(f"non-numeric value {cell!r} at row {row}, column {col}") from None
    if not math.isfinite(value):
        raise DataFormatError(f"non-finite value {cell!r} at row {row}, column {col}")
    return value


def load_csv(path, label_column: str | int = "last", has_header: bool = False) -> Dataset:
    """Read a comma-separated file; one column holds the class label.

    Rows and columns in error messages are 1-based file positions.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    if has_header and rows:
        rows = rows[1:]
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    width = len(rows[0][1])
    if width < 2:
        raise DataFormatError(f"{path}: need at least one feature and a label column")
    if label_column == "last":
        label_at = width - 1
    else:
        label_at = int(label_column)
        if label_at < 0:
            label_at += width
        if not 0 <= label_at < width:
            raise DataFormatError(f"label column {label_column} out of range for {width} columns")
    X = np.empty((len(rows), width - 1))
    labels = []
    for out, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise DataFormatError(
                f"{path}: row {lineno} has {len(row)} columns, expected {width}"
            )
        label = row[label_at].strip()
        if not label:
            raise DataFormatError(f"missing label at row {lineno}, column {label_at + 1}")
        labels.append(label)
        feats = row[:label_at] + row[label_at + 1:]
        cols = [c for c in range(width) if c != label_at]
        X[out] = [_parse_float(cell, lineno, c + 1) for cell, c in zip(feats, cols)]
    Y, names = one_hot(labels)
    return Dataset(X, Y, names, name=path.stem)


def load_libsvm(path, n_features: int | None = None) -> Dataset:
    """Read ``label idx:val ...`` lines with 1-based feature indices."""
    path = Path(path)
    labels: list[str] = []
    entries: list[list[tuple[int, float]]] = []
    width = n_features or 0
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split("#", 1)[0].split()
            if not tokens:
                continue
            labels.append(tokens[0])
            row = []
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    if not sep:
                        raise ValueError
                    j = int(idx)
                    v = float(val)
                except ValueError:
                    raise DataFormatError(f"{path}: malformed token {tok!r} on line {lineno}") from None
                if j < 1 or not math.isfinite(v):
                    raise DataFormatError(f"{path}: malformed token {tok!r} on line {lineno}")
                row.append((j - 1, v))
                width = max(width, j)
            entries.append(row)
    if not labels:
        raise DataFormatError(f"{path}: no data rows")
    if n_features is not None and width > n_features:
        raise DataFormatError(f"{path}: feature index {width} exceeds n_features={n_features}")
    X = np.zeros((len(labels), max(width, 1)))
    for i, row in enumerate(entries):
        for j, v in row:
            X[i, j] = v
    Y, names = one_hot(labels)
    return Dataset(X, Y, names, name=path.stem)


def write_libsvm(ds: Dataset, path) -> None:
    with Path(path).open("w") as fh:
        for label, row in zip(ds.labels, ds.X):
            feats = " ".join(f"{j + 1}:{v!r}" for j, v in enumerate(row.tolist()) if v != 0.0)
            fh.write(f"{label} {feats}".rstrip() + "\n")


def feature_ranges(X: np.ndarray) -> np.ndarray:
    return np.column_stack([X.min(axis=0), X.max(axis=0)])


def apply_ranges(X, ranges: np.ndarray) -> np.ndarray:
    """Map each feature from its recorded [min, max] onto [-1, 1].

    Constant features map to 0. Values outside the recorded range (unseen
    data) are clipped.
    """
    X = np.asarray(X, dtype=np.float64)
    lo, hi = ranges[:, 0], ranges[:, 1]
    span = hi - lo
    flat = span == 0.0
    safe = np.where(flat, 1.0, span)
    out = 2.0 * (X - lo) / safe - 1.0
    out[:, flat] = 0.0
    return np.clip(out, -1.0, 1.0)


def normalize(ds: Dataset) -> Dataset:
    ranges = feature_ranges(ds.X)
    return Dataset(apply_ranges(ds.X, ranges), ds.Y, ds.class_names, ranges, ds.name)


def shuffle_rows(ds: Dataset, seed: int) -> Dataset:
    perm = np.random.default_rng(seed).permutation(ds.n_samples)
    return Dataset(ds.X[perm], ds.Y[perm], ds.class_names, ds.feature_ranges, ds.name)


def synth(n_samples: int, n_features: int, n_classes: int, seed: int = 0, spread: float = 3.0) -> Dataset:
    """Gaussian clusters, one per class, normalized to [-1, 1].

    Cluster centres are drawn so that the distance between two of them is
    about ``spread * sqrt(2)`` noise standard deviations, which keeps the
    problem learnable but not trivially separable.
    """
    if min(n_samples, n_features, n_classes) < 1:
        raise ValueError("synth dimensions must all be >= 1")
    rng = np.random.default_rng(seed)
    centres = rng.normal(scale=spread / math.sqrt(n_features), size=(n_classes, n_features))
    codes = rng.permutation(np.arange(n_samples) % n_classes)
    # relabel so class k is the k-th to appear, matching the file loaders
    _, first = np.unique(codes, return_index=True)
    rank = np.empty(first.size, dtype=np.intp)
    rank[np.argsort(first)] = np.arange(first.size)
    codes = rank[codes]
    X = centres[codes] + rng.normal(size=(n_samples, n_features))
    Y = np.zeros((n_samples, n_classes))
    Y[np.arange(n_samples), codes] = 1.0
    names = tuple(f"c{k}" for k in range(n_classes))
    name = f"synth-{n_samples}x{n_features}x{n_classes}-s{seed}"
    return normalize(Dataset(X, Y, names, name=name))
