"""Dataset loading, standardization, and deterministic cross-validation folds.

Supported on-disk formats:

* LIBSVM text: one example per line, ``label idx:val ...`` with 1-based,
  strictly increasing indices. Missing indices are zeros. Labels may be
  {0, 1} (0 maps to -1) or {-1, +1}.
* CSV: rectangular numeric table, comma-separated, optional single header
  row (auto-detected when the first row has any non-numeric cell). One
  column holds the label; the rest are features.

All reals are parsed as 64-bit floats.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import LabelError, ParseError


@dataclass(frozen=True)
class Dataset:
    """A feature matrix with ±1 labels.

    features: (m, N) float64, finite.
    labels: (m,) float64, every entry exactly -1.0 or +1.0.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str] | None = None

    def __post_init__(self) -> None:
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"features must be a nonempty 2-d matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"labels shape {y.shape} does not match {X.shape[0]} rows")
        if not np.isfinite(X).all():
            raise ValueError("features contain non-finite values")
        if not np.all((y == 1.0) | (y == -1.0)):
            raise LabelError("labels must be exactly -1 or +1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def num_examples(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.feature_names)


@dataclass(frozen=True)
class Standardizer:
    """Per-column affine map x -> (x - mean) / std fitted on a training set.

    Columns whose population std fell below 1e-12 are centered only
    (their recorded std is 1).
    """

    mean: np.ndarray
    std: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.mean.shape[0]:
            raise ValueError(
                f"expected {self.mean.shape[0]} features, got {X.shape[1]}"
            )
        return (X - self.mean) / self.std

    @staticmethod
    def identity(num_features: int) -> "Standardizer":
        return Standardizer(np.zeros(num_features), np.ones(num_features))


def _map_label(raw: float, lineno: int) -> float:
    if raw in (1.0, -1.0):
        return raw
    if raw == 0.0:
        return -1.0
    raise LabelError(f"line {lineno}: label {raw!r} not in {{0, 1, -1, +1}}")


def load_libsvm(path: str) -> Dataset:
    """Parse a LIBSVM-format text file into a Dataset."""
    labels: list[float] = []
    rows: list[list[tuple[int, float]]] = []
    max_index = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                raw_label = float(tokens[0])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: bad label token {tokens[0]!r}") from exc
            labels.append(_map_label(raw_label, lineno))
            entries: list[tuple[int, float]] = []
            prev = 0
            for tok in tokens[1:]:
                try:
                    idx_str, val_str = tok.split(":", 1)
                    idx = int(idx_str)
                    val = float(val_str)
                except ValueError as exc:
                    raise ParseError(f"line {lineno}: bad feature token {tok!r}") from exc
                if idx < 1:
                    raise ParseError(f"line {lineno}: index {idx} is not 1-based")
                if idx <= prev:
                    raise ParseError(f"line {lineno}: indices not strictly increasing at {idx}")
                prev = idx
                entries.append((idx, val))
            rows.append(entries)
            if entries:
                max_index = max(max_index, entries[-1][0])
    if not rows:
        raise ParseError("file contains no examples")
    n = max(max_index, 1)
    X = np.zeros((len(rows), n))
    for i, entries in enumerate(rows):
        for idx, val in entries:
            X[i, idx - 1] = val
    return Dataset(X, np.asarray(labels))


def load_csv(path: str, label_column: int = -1) -> Dataset:
    """Parse a numeric CSV (optional single header row) into a Dataset."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        raw_rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not raw_rows:
        raise ParseError("file contains no rows")

    def _numeric(row: list[str]) -> list[float] | None:
        try:
            return [float(c) for c in row]
        except ValueError:
            return None

    names: list[str] | None = None
    body_start = 0
    if _numeric(raw_rows[0]) is None:
        names = [c.strip() for c in raw_rows[0]]
        body_start = 1
    body = raw_rows[body_start:]
    if not body:
        raise ParseError("file contains a header but no data rows")

    width = len(body[0])
    data = np.empty((len(body), width))
    for i, row in enumerate(body):
        lineno = body_start + i + 1
        if len(row) != width:
            raise ParseError(f"line {lineno}: expected {width} cells, got {len(row)}")
        vals = _numeric(row)
        if vals is None:
            raise ParseError(f"line {lineno}: non-numeric cell")
        data[i] = vals

    col = label_column if label_column >= 0 else width + label_column
    if not 0 <= col < width:
        raise ParseError(f"label column {label_column} out of range for {width} columns")
    y = np.array([_map_label(v, body_start + i + 1) for i, v in enumerate(data[:, col])])
    X = np.delete(data, col, axis=1)
    if X.shape[1] < 1:
        raise ParseError("no feature columns remain after removing the label column")
    if names is not None:
        names = [nm for j, nm in enumerate(names) if j != col]
    return Dataset(X, y, names)


def standardize(
    train: Dataset, others: list[Dataset] | tuple[Dataset, ...] = ()
) -> tuple[Dataset, list[Dataset], Standardizer]:
    """Z-score the training features (population std) and apply the same map to others."""
    X = train.features
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    rec = Standardizer(mean, std)
    train_std = Dataset(rec.apply(X), train.labels, train.feature_names)
    others_std = [Dataset(rec.apply(d.features), d.labels, d.feature_names) for d in others]
    return train_std, others_std, rec


@dataclass(frozen=True)
class FoldAssignment:
    """Deterministic fold index per example; sizes differ by at most one."""

    fold_of: np.ndarray
    num_folds: int
    seed: int = field(default=0)

    def indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)


def make_folds(m: int, num_folds: int, seed: int) -> FoldAssignment:
    """Deal a seeded permutation of [0, m) round-robin into ``num_folds`` folds."""
    if num_folds < 2:
        raise ValueError(f"num_folds must be >= 2, got {num_folds}")
    if m < num_folds:
        raise ValueError(f"m={m} is smaller than num_folds={num_folds}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    fold_of = np.empty(m, dtype=np.int64)
    fold_of[perm] = np.arange(m) % num_folds
    return FoldAssignment(fold_of, num_folds, seed)


def split_cv(folds: FoldAssignment, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Protocol split: test = fold i, validation = fold (i+1) mod F, train = rest."""
    F = folds.num_folds
    if not 0 <= i < F:
        raise IndexError(f"fold index {i} out of range [0, {F})")
    test = folds.indices(i)
    val = folds.indices((i + 1) % F)
    mask = (folds.fold_of != i) & (folds.fold_of != (i + 1) % F)
    train = np.flatnonzero(mask)
    return train, val, test
