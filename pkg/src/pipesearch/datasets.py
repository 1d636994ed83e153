"""Tabular dataset loading and resampling.

CSV in (header row, UTF-8, comma delimiter, "" = missing). Numeric columns are
median-imputed, categorical columns one-hot encoded with missing as its own
category. The FeatureCodec captures the load-time transform so a trained model
can re-encode fresh rows with the same schema.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dataset",
    "FeatureCodec",
    "ColumnCodec",
    "DatasetError",
    "load_dataset",
    "make_splits",
    "subsample",
    "stratified_prefix",
]

MISSING = ""
MISSING_CATEGORY = "__missing__"


class DatasetError(ValueError):
    """Problem loading or resampling a dataset."""


@dataclass
class ColumnCodec:
    """How one raw CSV column maps to feature columns."""

    name: str
    kind: str  # numeric | categorical
    median: float = 0.0  # numeric imputation value
    categories: list = field(default_factory=list)  # categorical levels, sorted

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "median": self.median,
                "categories": list(self.categories)}

    @staticmethod
    def from_dict(d: dict) -> "ColumnCodec":
        return ColumnCodec(d["name"], d["kind"], d.get("median", 0.0),
                           list(d.get("categories", [])))


@dataclass
class FeatureCodec:
    """Full raw-row -> feature-vector transform plus the class label map."""

    target: str
    columns: list  # of ColumnCodec, in raw column order
    classes: list  # label strings, index = class id

    @property
    def feature_names(self) -> list:
        names = []
        for col in self.columns:
            if col.kind == "numeric":
                names.append(col.name)
            else:
                names.extend(f"{col.name}={c}" for c in col.categories)
        return names

    def encode_rows(self, header: list, rows: list) -> np.ndarray:
        """Encode raw string rows (already column-aligned with ``header``)."""
        want = [c.name for c in self.columns]
        have = [h for h in header if h != self.target]
        missing = [c for c in want if c not in have]
        extra = [c for c in have if c not in want]
        if missing or extra:
            parts = []
            if missing:
                parts.append("missing columns: " + ", ".join(missing))
            if extra:
                parts.append("extra columns: " + ", ".join(extra))
            raise DatasetError("; ".join(parts))
        idx = {h: i for i, h in enumerate(header)}
        out = np.zeros((len(rows), len(self.feature_names)))
        j = 0
        for col in self.columns:
            src = idx[col.name]
            if col.kind == "numeric":
                for r, row in enumerate(rows):
                    raw = row[src]
                    out[r, j] = col.median if raw == MISSING else float(raw)
                j += 1
            else:
                cat_idx = {c: k for k, c in enumerate(col.categories)}
                for r, row in enumerate(rows):
                    raw = row[src]
                    if raw == MISSING:
                        raw = MISSING_CATEGORY
                    k = cat_idx.get(raw)
                    if k is not None:  # unseen categories encode as all-zero
                        out[r, j + k] = 1.0
                j += len(col.categories)
        return out

    def to_dict(self) -> dict:
        return {"target": self.target, "classes": list(self.classes),
                "columns": [c.to_dict() for c in self.columns]}

    @staticmethod
    def from_dict(d: dict) -> "FeatureCodec":
        return FeatureCodec(d["target"], [ColumnCodec.from_dict(c) for c in d["columns"]],
                            list(d["classes"]))


@dataclass
class Dataset:
    X: np.ndarray  # (n, d) float
    y: np.ndarray  # (n,) int class ids
    classes: list  # label strings
    column_names: list  # expanded feature names
    codec: FeatureCodec | None = None

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(self.X[idx], self.y[idx], self.classes, self.column_names, self.codec)


def _is_numeric_column(values) -> bool:
    seen_any = False
    for v in values:
        if v == MISSING:
            continue
        seen_any = True
        try:
            float(v)
        except ValueError:
            return False
    return seen_any


def read_csv(path) -> tuple[list, list]:
    """Raw (header, rows) with ragged-row and empty-file checks."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DatasetError(f"unparseable file: {path} is empty") from None
            rows = []
            for i, row in enumerate(reader):
                if len(row) != len(header):
                    raise DatasetError(
                        f"unparseable file: row {i + 2} has {len(row)} fields, "
                        f"expected {len(header)}")
                rows.append(row)
    except UnicodeDecodeError:
        raise DatasetError(f"unparseable file: {path} is not UTF-8 text") from None
    return header, rows


def load_dataset(path, target: str) -> Dataset:
    """Load a classification CSV. Deterministic: column order is preserved,
    categorical levels are sorted, missing numerics take the column median."""
    header, rows = read_csv(path)
    if target not in header:
        raise DatasetError(f"missing target column: {target!r} not in header")
    if len(rows) < 10:
        raise DatasetError(f"too few rows: {len(rows)} < 10")
    t_idx = header.index(target)

    labels = [row[t_idx] for row in rows]
    if any(v == MISSING for v in labels):
        raise DatasetError("target column contains missing values")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DatasetError(f"need at least 2 classes, found {len(classes)}")
    class_idx = {c: i for i, c in enumerate(classes)}
    y = np.array([class_idx[v] for v in labels], dtype=np.int64)
    counts = np.bincount(y, minlength=len(classes))
    for c, cnt in zip(classes, counts):
        if cnt < 2:
            raise DatasetError(f"class {c!r} has {cnt} instance(s), need >= 2")

    codecs = []
    for j, name in enumerate(header):
        if j == t_idx:
            continue
        values = [row[j] for row in rows]
        if _is_numeric_column(values):
            present = sorted(float(v) for v in values if v != MISSING)
            median = _median(present)
            codecs.append(ColumnCodec(name, "numeric", median=median))
        else:
            cats = sorted({v if v != MISSING else MISSING_CATEGORY for v in values})
            codecs.append(ColumnCodec(name, "categorical", categories=cats))
    codec = FeatureCodec(target, codecs, classes)
    X = codec.encode_rows(header, rows)
    if not np.all(np.isfinite(X)):
        raise DatasetError("unparseable file: non-finite numeric value")
    return Dataset(X, y, classes, codec.feature_names, codec)


def _median(sorted_values) -> float:
    n = len(sorted_values)
    if n == 0:
        return 0.0
    mid = n // 2
    if n % 2:
        return float(sorted_values[mid])
    return (sorted_values[mid - 1] + sorted_values[mid]) / 2.0


# ---------------------------------------------------------------------------
# Stratified k-fold and nested stratified subsampling

def make_splits(ds: Dataset, k: int, seed: int) -> list[np.ndarray]:
    """Stratified k-fold partition: list of k validation index arrays. Each
    class's rows are shuffled once and dealt round-robin, so per-fold class
    counts differ by at most 1."""
    if k < 2:
        raise DatasetError(f"need k >= 2 folds, got {k}")
    counts = ds.class_counts()
    for cls, cnt in zip(ds.classes, counts):
        if cnt < k:
            raise DatasetError(f"cannot stratify: class {cls!r} has {cnt} < {k} instances")
    rng = np.random.RandomState(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    pos = 0  # dealing position carries across classes so fold sizes stay even
    for c in range(ds.n_classes):
        idx = np.flatnonzero(ds.y == c)
        rng.shuffle(idx)
        for row in idx:
            folds[pos % k].append(int(row))
            pos += 1
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


def stratified_prefix(y: np.ndarray, n_classes: int, fraction: float, seed: int) -> np.ndarray:
    """Indices of a stratified subsample of ceil(fraction * n) rows, with the
    nesting guarantee: for the same seed, a smaller fraction selects a subset
    of a larger fraction's rows.

    Rows are ranked by an interleaved priority: within each class a seeded
    shuffle fixes an order, and the i-th row of a class with c members gets
    key (i+1)/c, so any prefix stays proportionally stratified."""
    n = len(y)
    if not 0.0 < fraction <= 1.0:
        raise DatasetError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return np.arange(n, dtype=np.int64)
    m = math.ceil(fraction * n)
    rng = np.random.RandomState(seed)
    keyed = []
    for c in range(n_classes):
        idx = np.flatnonzero(y == c)
        rng.shuffle(idx)
        for i, row in enumerate(idx):
            keyed.append(((i + 1) / len(idx), c, int(row)))
    keyed.sort()
    chosen = sorted(row for _, _, row in keyed[:m])
    return np.array(chosen, dtype=np.int64)


def subsample(ds: Dataset, fraction: float, seed: int) -> Dataset:
    """Stratified row subsample at the given fidelity fraction; identity at
    fraction=1.0. Raises "fidelity too low" if any class would fall below 2."""
    idx = stratified_prefix(ds.y, ds.n_classes, fraction, seed)
    if fraction == 1.0:
        return ds
    sub_counts = np.bincount(ds.y[idx], minlength=ds.n_classes)
    if np.any(sub_counts < 2):
        short = [c for c, cnt in zip(ds.classes, sub_counts) if cnt < 2]
        raise DatasetError(f"fidelity too low: class(es) {short} below 2 instances")
    return ds.take(idx)
