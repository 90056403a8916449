"""Dataset container, parsers, standardization, splits and label noise."""

from __future__ import annotations

import csv
import gzip
import io
import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

DATA_ENV = "BBGAMMA_DATA_DIR"
BUNDLED_DIR = Path(__file__).parent / "datasets"
UCI_NAMES = ("breast", "heart", "liver", "pima")


class DataError(ValueError):
    """Malformed input data."""


@dataclass
class Dataset:
    """Feature rows with binary labels in {0, 1}.

    ``X`` is a dense ``(n, d)`` array or a CSR matrix. ``standardized`` is set
    once a scaler has been applied and guards against applying it twice.
    ``ids`` maps rows back to positions in the originally loaded table.
    """

    X: np.ndarray | sp.csr_matrix
    y: np.ndarray
    name: str = ""
    feature_names: list[str] | None = None
    standardized: bool = False
    ids: np.ndarray | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.int8).ravel()
        # original row positions, carried through subsetting for leak checks
        self.ids = np.arange(self.y.size) if self.ids is None else np.asarray(self.ids)
        if not sp.issparse(self.X):
            self.X = np.asarray(self.X, dtype=float)
            if self.X.ndim == 1:
                self.X = self.X.reshape(len(self.y), -1) if len(self.y) else self.X.reshape(0, 0)
        if self.X.shape[0] != self.y.shape[0]:
            raise DataError(f"{self.X.shape[0]} rows but {self.y.shape[0]} labels")
        if self.y.size and not np.isin(self.y, (0, 1)).all():
            raise DataError("labels must be binary")

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.X)

    @property
    def t(self) -> np.ndarray:
        """Labels in the {-1, +1} margin convention."""
        return 2 * self.y.astype(int) - 1

    def dense(self) -> np.ndarray:
        return self.X.toarray() if self.is_sparse else self.X

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return replace(self, X=self.X[idx], y=self.y[idx], ids=self.ids[idx])

    def class_counts(self) -> tuple[int, int]:
        pos = int(self.y.sum())
        return pos, self.n - pos

    def require_both_classes(self) -> None:
        pos, neg = self.class_counts()
        if pos == 0 or neg == 0:
            raise DataError(f"dataset {self.name!r} lacks one class ({pos} pos / {neg} neg)")

    def equals(self, other: "Dataset") -> bool:
        """Exact equality of labels and feature values."""
        if self.X.shape != other.X.shape or not np.array_equal(self.y, other.y):
            return False
        a = self.X.toarray() if self.is_sparse else self.X
        b = other.X.toarray() if other.is_sparse else other.X
        return bool(np.array_equal(a, b))


def augment(X) -> np.ndarray | sp.csr_matrix:
    """Append the constant-1 bias column."""
    if sp.issparse(X):
        ones = sp.csr_matrix(np.ones((X.shape[0], 1)))
        return sp.hstack([X, ones], format="csr")
    X = np.asarray(X, dtype=float)
    return np.ascontiguousarray(np.hstack([X, np.ones((X.shape[0], 1))]))


# -- libsvm -----------------------------------------------------------------

def parse_libsvm(stream: TextIO | Iterable[str], dim: int | None = None,
                 name: str = "") -> Dataset:
    """Parse ``<label> <idx>:<val> ...`` lines (1-based ascending indices)."""
    indptr, indices, values, labels = [0], [], [], []
    max_idx = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise DataError(f"line {lineno}: bad label {tokens[0]!r}") from None
        if label in (1.0,):
            labels.append(1)
        elif label in (-1.0, 0.0):
            labels.append(0)
        else:
            raise DataError(f"line {lineno}: label {tokens[0]!r} is not binary")
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise DataError(f"line {lineno}: unparseable token {tok!r}") from None
            if not sep or idx < 1:
                raise DataError(f"line {lineno}: unparseable token {tok!r}")
            if idx <= prev:
                raise DataError(f"line {lineno}: index {idx} not ascending")
            prev = idx
            indices.append(idx - 1)
            values.append(val)
            max_idx = max(max_idx, idx)
        indptr.append(len(indices))
    d = max_idx if dim is None else dim
    if dim is not None and max_idx > dim:
        raise DataError(f"index {max_idx} exceeds declared dimension {dim}")
    X = sp.csr_matrix((np.asarray(values, dtype=float), np.asarray(indices, dtype=np.int64),
                       np.asarray(indptr, dtype=np.int64)), shape=(len(labels), d))
    return Dataset(X, np.asarray(labels), name=name)


def write_libsvm(data: Dataset, stream: TextIO) -> None:
    """Inverse of :func:`parse_libsvm`; floats use shortest round-trip repr."""
    X = data.X if data.is_sparse else sp.csr_matrix(data.X)
    X = X.tocsr()
    X.sort_indices()
    for i in range(data.n):
        start, end = X.indptr[i], X.indptr[i + 1]
        parts = ["+1" if data.y[i] == 1 else "-1"]
        parts += [f"{j + 1}:{float(v)!r}" for j, v in zip(X.indices[start:end], X.data[start:end])]
        stream.write(" ".join(parts) + "\n")


# -- csv ---------------------------------------------------------------------

@dataclass(frozen=True)
class Manifest:
    """How to read a CSV file: label column, positive label, missing policy."""

    file: str
    label_column: str | int
    positive_label: str
    missing_policy: str = "error"
    header: bool = True

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Manifest":
        raw = json.loads(Path(path).read_text())
        return cls(file=raw.get("file", ""), label_column=raw["label_column"],
                   positive_label=str(raw["positive_label"]),
                   missing_policy=raw.get("missing_policy", "error"),
                   header=raw.get("header", True))


MISSING_TOKENS = {"", "?", "na", "nan", "NA", "NaN", "null"}


def parse_csv(stream: TextIO, label_column: str | int = -1, positive_label: str | None = None,
              header: bool = True, name: str = "") -> Dataset:
    """Parse a rectangular numeric table with one binary label column.

    Without ``positive_label`` labels must already be {0, 1}; otherwise the
    given value maps to 1 and exactly one other value must map to 0.
    """
    reader = csv.reader(stream)
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    names = None
    if header:
        if not rows:
            raise DataError("empty csv")
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise DataError("csv has no data rows")
    width = len(rows[0])
    if isinstance(label_column, str):
        if names is None or label_column not in names:
            raise DataError(f"label column {label_column!r} not found")
        lab = names.index(label_column)
    else:
        lab = label_column % width
    feats, labels = [], []
    for lineno, row in enumerate(rows, start=2 if header else 1):
        if len(row) != width:
            raise DataError(f"line {lineno}: ragged row ({len(row)} fields, expected {width})")
        cells = [c.strip() for c in row]
        if any(c in MISSING_TOKENS for c in cells):
            raise DataError(f"line {lineno}: missing value")
        labels.append(cells[lab])
        try:
            feats.append([float(c) for j, c in enumerate(cells) if j != lab])
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
    distinct = sorted(set(labels))
    if positive_label is None:
        try:
            y = np.array([float(v) for v in labels])
        except ValueError:
            raise DataError("non-numeric labels need a positive_label mapping") from None
        if not np.isin(y, (0.0, 1.0)).all():
            raise DataError(f"labels {distinct} are not binary; pass positive_label")
    else:
        if len(distinct) > 2 or (len(distinct) == 2 and positive_label not in distinct):
            raise DataError(f"labels {distinct} cannot be mapped with positive label {positive_label!r}")
        y = np.array([1 if v == positive_label else 0 for v in labels])
    feature_names = None if names is None else [c for j, c in enumerate(names) if j != lab]
    return Dataset(np.asarray(feats, dtype=float), y, name=name, feature_names=feature_names)


def _open_text(path: Path) -> TextIO:
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


def load_manifest_csv(manifest_path: str | os.PathLike, name: str | None = None) -> Dataset:
    path = Path(manifest_path)
    man = Manifest.load(path)
    with _open_text(path.parent / man.file) as fh:
        return parse_csv(fh, man.label_column, man.positive_label, man.header,
                         name=name or path.stem)


def data_dir(override: str | os.PathLike | None = None) -> Path:
    if override:
        return Path(override)
    env = os.environ.get(DATA_ENV)
    return Path(env) if env else BUNDLED_DIR


def load_dataset(ref: str, fmt: str | None = None, root: str | os.PathLike | None = None) -> Dataset:
    """Load by bundled name (``heart``), manifest path, CSV or libsvm file."""
    path = Path(ref)
    if not path.exists():
        candidate = data_dir(root) / f"{ref}.json"
        if not candidate.exists():
            raise FileNotFoundError(f"dataset {ref!r} not found (looked in {candidate.parent})")
        return load_manifest_csv(candidate, name=ref)
    if path.suffix == ".json":
        return load_manifest_csv(path)
    if fmt is None:
        fmt = "csv" if ".csv" in path.suffixes else "libsvm"
    with _open_text(path) as fh:
        if fmt == "libsvm":
            return parse_libsvm(fh, name=path.stem)
        if fmt == "csv":
            return parse_csv(fh, name=path.stem)
    raise ValueError(f"unknown format {fmt!r}")


# -- preprocessing -----------------------------------------------------------

@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, data: Dataset) -> Dataset:
        if data.standardized:
            raise ValueError(f"dataset {data.name!r} is already standardized")
        X = data.dense()
        return replace(data, X=(X - self.mean) / self.std, standardized=True)


def standardize(train: Dataset, others: Iterable[Dataset] = ()) -> tuple[Dataset, list[Dataset], Scaler]:
    """Z-score every feature with training statistics (std floored at 1e-12)."""
    if train.n == 0:
        raise ValueError("cannot standardize an empty training set")
    X = train.dense()
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    mean = np.where(X.std(axis=0) < 1e-12, X.mean(axis=0), mean)
    scaler = Scaler(mean, std)
    return scaler.apply(train), [scaler.apply(o) for o in others], scaler


# -- splitting and noise -----------------------------------------------------

@dataclass(frozen=True)
class SplitPlan:
    seed: int = 0
    folds: int = 5
    repetitions: int = 10
    stratified: bool = True


def _stratified_folds(y: np.ndarray, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    buckets = [[] for _ in range(k)]
    offset = 0
    for cls in (1, 0):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            buckets[(j + offset) % k].append(i)
        offset = (offset + len(idx)) % k
    return [np.sort(np.asarray(b, dtype=int)) for b in buckets]


def make_splits(data: Dataset, plan: SplitPlan) -> list[tuple[np.ndarray, np.ndarray]]:
    """``repetitions`` x ``folds`` (train, test) index pairs, deterministic under seed."""
    data.require_both_classes()
    if plan.folds < 2 or plan.folds > data.n:
        raise ValueError(f"cannot make {plan.folds} folds from {data.n} rows")
    rng = np.random.default_rng(plan.seed)
    everything = np.arange(data.n)
    splits = []
    for _ in range(plan.repetitions):
        if plan.stratified:
            folds = _stratified_folds(data.y, plan.folds, rng)
        else:
            perm = rng.permutation(data.n)
            folds = [np.sort(f) for f in np.array_split(perm, plan.folds)]
        for test in folds:
            splits.append((np.setdiff1d(everything, test), test))
    return splits


def inner_folds(y: np.ndarray, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold (train, validation) pairs over positions ``0..len(y)``."""
    folds = _stratified_folds(np.asarray(y), k, np.random.default_rng(seed))
    everything = np.arange(len(y))
    return [(np.setdiff1d(everything, f), f) for f in folds]


def inject_label_noise(train: Dataset, rate: float, seed: int) -> Dataset:
    """Flip ``floor(rate * n)`` labels chosen uniformly without replacement."""
    if not 0.0 <= rate <= 0.5:
        raise ValueError(f"noise rate must be in [0, 0.5], got {rate}")
    count = int(math.floor(rate * train.n + 1e-9))
    if count == 0:
        return replace(train, y=train.y.copy())
    rng = np.random.default_rng(seed)
    flip = rng.choice(train.n, size=count, replace=False)
    y = train.y.copy()
    y[flip] = 1 - y[flip]
    return replace(train, y=y)
