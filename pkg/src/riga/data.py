"""Tabular dataset container and preprocessing.

Everything here is pure given a seed: operations return new datasets and
never mutate their inputs.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class CsvFormatError(ValueError):
    """Raised for malformed CSV input; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ImbalanceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TabularDataset:
    rows: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    missing_mask: np.ndarray | None = None
    synthetic: np.ndarray | None = None
    label_mapping: dict = field(default_factory=dict)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ValueError("rows must be a 2-D matrix")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        n, d = rows.shape
        if n < 1 or d < 1:
            raise ValueError("dataset needs at least one row and one feature")
        if labels.shape[0] != n:
            raise ValueError(f"{labels.shape[0]} labels for {n} rows")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0/1")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != d:
            raise ValueError(f"{len(names)} feature names for {d} columns")
        mask = self.missing_mask
        mask = np.zeros((n, d), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        if mask.shape != (n, d):
            raise ValueError("missing_mask shape does not match rows")
        syn = self.synthetic
        syn = np.zeros(n, dtype=bool) if syn is None else np.asarray(syn, dtype=bool).reshape(-1)
        if syn.shape[0] != n:
            raise ValueError("synthetic flag length does not match rows")
        for arr in (rows, labels, mask, syn):
            arr.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "missing_mask", mask)
        object.__setattr__(self, "synthetic", syn)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def class_counts(self) -> tuple[int, int]:
        n1 = int(self.labels.sum())
        return self.n_rows - n1, n1

    def subset(self, index) -> "TabularDataset":
        index = np.asarray(index)
        return TabularDataset(
            self.rows[index],
            self.labels[index],
            self.feature_names,
            self.missing_mask[index],
            self.synthetic[index],
            dict(self.label_mapping),
        )

    def select_features(self, columns) -> "TabularDataset":
        columns = np.asarray(columns, dtype=np.int64)
        return TabularDataset(
            self.rows[:, columns],
            self.labels,
            tuple(self.feature_names[j] for j in columns),
            self.missing_mask[:, columns],
            self.synthetic,
            dict(self.label_mapping),
        )

    def with_rows(self, rows) -> "TabularDataset":
        return TabularDataset(
            rows, self.labels, self.feature_names, None, self.synthetic, dict(self.label_mapping)
        )

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.rows).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        h.update(np.ascontiguousarray(self.missing_mask).tobytes())
        h.update("\x1f".join(self.feature_names).encode())
        return h.hexdigest()


def concat(a: TabularDataset, b: TabularDataset) -> TabularDataset:
    if a.feature_names != b.feature_names:
        raise ValueError("cannot concatenate datasets with different features")
    return TabularDataset(
        np.vstack([a.rows, b.rows]),
        np.concatenate([a.labels, b.labels]),
        a.feature_names,
        np.vstack([a.missing_mask, b.missing_mask]),
        np.concatenate([a.synthetic, b.synthetic]),
        dict(a.label_mapping),
    )


@dataclass(frozen=True)
class NormalizationParams:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64).reshape(-1)
        hi = np.asarray(self.max, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("min/max length mismatch")
        if np.any(lo > hi):
            raise ValueError("min exceeds max for some feature")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def constant(self) -> np.ndarray:
        return self.min == self.max

    def apply(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        span = self.max - self.min
        safe = np.where(self.constant, 1.0, span)
        out = (rows - self.min) / safe
        return np.where(self.constant, 0.0, out)

    def invert(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        return self.min + rows * (self.max - self.min)

    def to_dict(self) -> dict:
        return {"min": self.min.tolist(), "max": self.max.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(np.array(d["min"], dtype=np.float64), np.array(d["max"], dtype=np.float64))


def _parse_float(cell: str, line: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise CsvFormatError(f"non-numeric value {cell!r} in column {column!r}", line) from None


def load_csv(path, label_column: str, missing_token: str = "") -> TabularDataset:
    """Read a headed, comma-separated numeric table.

    The label column must hold exactly two distinct values. The rarer one
    becomes label 1; on a tie the lexicographically larger value does. The
    original values are kept in ``label_mapping``.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError("empty file", 1) from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ValueError(f"label column {label_column!r} not in header")
        li = header.index(label_column)
        names = [h for i, h in enumerate(header) if i != li]
        raw_labels, values, mask = [], [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CsvFormatError(f"expected {len(header)} fields, got {len(row)}", line)
            label = row[li].strip()
            if label == "" or label == missing_token:
                raise CsvFormatError("missing label", line)
            raw_labels.append(label)
            vals, miss = [], []
            for i, cell in enumerate(row):
                if i == li:
                    continue
                cell = cell.strip()
                if cell == "" or cell == missing_token:
                    vals.append(np.nan)
                    miss.append(True)
                else:
                    vals.append(_parse_float(cell, line, header[i]))
                    miss.append(False)
            values.append(vals)
            mask.append(miss)
    if not values:
        raise CsvFormatError("no data rows", 2)
    distinct = sorted(set(raw_labels))
    if len(distinct) != 2:
        raise ValueError(f"label column must be binary, found {len(distinct)} distinct values")
    counts = {v: raw_labels.count(v) for v in distinct}
    minority = distinct[1] if counts[distinct[0]] == counts[distinct[1]] else min(distinct, key=counts.get)
    mapping = {v: int(v == minority) for v in distinct}
    labels = np.array([mapping[v] for v in raw_labels], dtype=np.int64)
    return TabularDataset(np.array(values, dtype=np.float64), labels, tuple(names), np.array(mask), None, mapping)


def drop_missing(ds: TabularDataset, max_missing_per_feature: int) -> TabularDataset:
    """Drop features missing in more than the threshold, then incomplete rows."""
    if max_missing_per_feature < 0:
        raise ValueError("threshold must be >= 0")
    per_feature = ds.missing_mask.sum(axis=0)
    keep_cols = np.flatnonzero(per_feature <= max_missing_per_feature)
    if keep_cols.size == 0:
        raise ValueError("no features remain")
    mask = ds.missing_mask[:, keep_cols]
    keep_rows = np.flatnonzero(~mask.any(axis=1))
    if keep_rows.size == 0:
        raise ValueError("no complete rows remain")
    return ds.select_features(keep_cols).subset(keep_rows)


def normalize(ds: TabularDataset) -> tuple[TabularDataset, NormalizationParams]:
    if ds.missing_mask.any():
        raise ValueError("normalize requires a dataset without missing values")
    params = NormalizationParams(ds.rows.min(axis=0), ds.rows.max(axis=0))
    return ds.with_rows(params.apply(ds.rows)), params


def denormalize(rows, params: NormalizationParams) -> np.ndarray:
    return params.invert(rows)


def minority_target(n_major: int, minority_fraction: float) -> int:
    """Closest integer minority count m with m / (n_major + m) ~= fraction."""
    exact = minority_fraction * n_major / (1.0 - minority_fraction)
    lo = math.floor(exact)
    cands = [c for c in (lo, lo + 1) if c >= 0]
    return min(cands, key=lambda m: (abs(m / (n_major + m) - minority_fraction) if n_major + m else 1.0, m))


def remove_minority(ds: TabularDataset, count: int, seed: int) -> TabularDataset:
    """Remove ``count`` class-1 rows chosen uniformly at random."""
    minority = np.flatnonzero(ds.labels == 1)
    if not 0 <= count <= minority.size:
        raise ValueError(f"cannot remove {count} of {minority.size} minority rows")
    rng = np.random.default_rng(seed)
    drop = rng.choice(minority, size=count, replace=False)
    keep = np.setdiff1d(np.arange(ds.n_rows), drop)
    return ds.subset(keep)


def induce_imbalance(ds: TabularDataset, minority_fraction: float, seed: int) -> TabularDataset:
    if not 0.0 < minority_fraction < 0.5:
        raise ValueError("minority_fraction must lie in (0, 0.5)")
    n0, n1 = ds.class_counts()
    target = minority_target(n0, minority_fraction)
    if target > n1:
        warnings.warn(
            f"minority share already below {minority_fraction}; dataset left unchanged",
            ImbalanceWarning,
            stacklevel=2,
        )
        return ds
    return remove_minority(ds, n1 - target, seed)


@dataclass(frozen=True)
class FoldSplit:
    k: int
    assignments: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64)
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def __iter__(self):
        for f in range(self.k):
            yield self.train_indices(f), self.test_indices(f)


def stratified_assign(labels, k: int, seed: int) -> np.ndarray:
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    out = np.empty(labels.shape[0], dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < 2:
            raise ValueError(f"class {c} has {idx.size} member(s); every training partition needs it")
        idx = rng.permutation(idx)
        out[idx] = (offset + np.arange(idx.size)) % k
        offset = (offset + idx.size) % k
    return out


def kfold_split(ds: TabularDataset, k: int, seed: int) -> FoldSplit:
    """Stratified k-fold assignment.

    Classes are dealt round-robin into folds, each class continuing where the
    previous one stopped, so fold sizes differ by at most one and each fold's
    per-class count is within one of ``n_c / k``. A class may have fewer
    than ``k`` members (some test folds then lack it) but needs at least two
    so every training partition contains it; ``k = N`` is refused.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if k >= ds.n_rows:
        raise ValueError(f"k={k} leaves single-sample test folds for N={ds.n_rows}")
    return FoldSplit(k, stratified_assign(ds.labels, k, seed))


def synth_imbalanced(n_major: int, n_minor: int, d: int, separation: float, seed: int) -> TabularDataset:
    """Two unit-variance Gaussian clusters whose means are ``separation`` apart.

    The offset direction is a seeded random unit vector, so the signal is
    spread over all features instead of sitting on one axis.
    """
    if min(n_major, n_minor, d) < 1:
        raise ValueError("counts must be >= 1")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    x0 = rng.standard_normal((n_major, d))
    x1 = rng.standard_normal((n_minor, d)) + separation * direction
    rows = np.vstack([x0, x1])
    labels = np.r_[np.zeros(n_major, dtype=np.int64), np.ones(n_minor, dtype=np.int64)]
    order = rng.permutation(rows.shape[0])
    names = tuple(f"f{j}" for j in range(d))
    return TabularDataset(rows[order], labels[order], names)


def dataset_manifest(ds: TabularDataset, params: NormalizationParams | None = None) -> dict:
    n0, n1 = ds.class_counts()
    out = {
        "N": ds.n_rows,
        "d": ds.n_features,
        "class_counts": {"0": n0, "1": n1},
        "content_hash": ds.content_hash(),
    }
    if params is not None:
        out["normalization"] = params.to_dict()
        out["constant_features"] = [ds.feature_names[j] for j in np.flatnonzero(params.constant)]
    if ds.label_mapping:
        out["label_mapping"] = dict(ds.label_mapping)
    return out


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True))


def from_arrays(rows: Sequence, labels: Sequence, feature_names=None) -> TabularDataset:
    rows = np.asarray(rows, dtype=np.float64)
    if feature_names is None:
        feature_names = tuple(f"f{j}" for j in range(rows.shape[1]))
    return TabularDataset(rows, labels, tuple(feature_names))


def append_synthetic(ds: TabularDataset, rows, label: int = 1) -> TabularDataset:
    """Append generated rows (all of class ``label``) flagged as synthetic."""
    rows = np.asarray(rows, dtype=np.float64).reshape(-1, ds.n_features)
    if rows.shape[0] == 0:
        return ds
    extra = TabularDataset(
        rows,
        np.full(rows.shape[0], label, dtype=np.int64),
        ds.feature_names,
        synthetic=np.ones(rows.shape[0], dtype=bool),
    )
    return concat(ds, extra)


def load_madelon(directory) -> TabularDataset:
    """The Madelon training split from its original whitespace-separated
    ``madelon_train.data`` / ``madelon_train.labels`` pair (labels -1/+1,
    +1 mapped to class 1)."""
    directory = Path(directory)
    rows = np.loadtxt(directory / "madelon_train.data", dtype=np.float64)
    raw = np.loadtxt(directory / "madelon_train.labels", dtype=np.int64).reshape(-1)
    if rows.shape[0] != raw.shape[0]:
        raise ValueError("madelon data and label files disagree on row count")
    if not np.isin(raw, (-1, 1)).all():
        raise ValueError("madelon labels must be -1/+1")
    names = tuple(f"V{j + 1}" for j in range(rows.shape[1]))
    return TabularDataset(rows, (raw == 1).astype(np.int64), names, label_mapping={"-1": 0, "1": 1})
