"""Equal-frequency discretization of tabular data for structure learning."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DiscreteData:
    values: np.ndarray  # N x V category indices
    cardinalities: tuple
    names: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64)
        if values.ndim != 2:
            raise ValueError("values must be N x V")
        cards = tuple(int(c) for c in self.cardinalities)
        names = tuple(str(s) for s in self.names)
        if len(cards) != values.shape[1] or len(names) != values.shape[1]:
            raise ValueError("one cardinality and one name per column")
        if any(c < 2 for c in cards):
            raise ValueError("every column needs cardinality >= 2")
        if values.size and (values.min() < 0 or np.any(values.max(axis=0) >= np.array(cards))):
            raise ValueError("category index out of range for its column")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "cardinalities", cards)
        object.__setattr__(self, "names", names)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def select(self, columns) -> "DiscreteData":
        columns = list(columns)
        return DiscreteData(
            self.values[:, columns],
            tuple(self.cardinalities[j] for j in columns),
            tuple(self.names[j] for j in columns),
        )


@dataclass(frozen=True)
class ColumnRule:
    """How one continuous column maps to categories."""

    kind: str  # "bins" | "levels"
    cuts: tuple  # bin edges for "bins", sorted raw levels for "levels"
    codes: tuple = ()  # compacted category per raw bin

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "levels":
            pos = np.searchsorted(np.asarray(self.cuts), x)
            return np.clip(pos, 0, len(self.cuts) - 1)
        raw = np.searchsorted(np.asarray(self.cuts), x, side="right")
        return np.asarray(self.codes)[raw]

    @property
    def cardinality(self) -> int:
        return len(self.cuts) if self.kind == "levels" else int(max(self.codes)) + 1


@dataclass
class Discretizer:
    bins: int
    names: tuple
    rules: dict = field(default_factory=dict)
    excluded: list = field(default_factory=list)

    def transform(self, rows, labels=None, label_name: str = "label") -> DiscreteData:
        rows = np.asarray(rows, dtype=np.float64)
        cols, names, cards = [], [], []
        for j, name in enumerate(self.names):
            rule = self.rules.get(name)
            if rule is None:
                continue
            cols.append(rule.apply(rows[:, j]))
            names.append(name)
            cards.append(rule.cardinality)
        if labels is not None:
            cols.append(np.asarray(labels, dtype=np.int64))
            names.append(label_name)
            cards.append(2)
        values = np.stack(cols, axis=1) if cols else np.zeros((rows.shape[0], 0), dtype=np.int64)
        return DiscreteData(values, tuple(cards), tuple(names))


def column_rule(x, bins: int) -> ColumnRule | None:
    """Rule for one column, or None when the column is constant."""
    x = np.asarray(x, dtype=np.float64)
    if np.isnan(x).any():
        raise ValueError("discretize needs complete data; drop missing values first")
    levels = np.unique(x)
    if levels.size < 2:
        return None
    if levels.size <= bins and np.all(levels == np.round(levels)):
        return ColumnRule("levels", tuple(levels.tolist()))
    edges = np.unique(np.quantile(x, np.arange(1, bins) / bins))
    raw = np.searchsorted(edges, x, side="right")
    used = np.unique(raw)
    if used.size < 2:
        return None
    # duplicate or empty bins are merged into their upper neighbour's code
    codes = np.searchsorted(used, np.arange(edges.size + 1))
    codes = np.minimum(codes, used.size - 1)
    return ColumnRule("bins", tuple(edges.tolist()), tuple(int(c) for c in codes))


def fit_discretizer(rows, names, bins: int = 3) -> Discretizer:
    if bins < 2:
        raise ValueError("bins must be >= 2")
    rows = np.asarray(rows, dtype=np.float64)
    disc = Discretizer(bins, tuple(names))
    for j, name in enumerate(disc.names):
        rule = column_rule(rows[:, j], bins)
        if rule is None:
            disc.excluded.append(name)
        else:
            disc.rules[name] = rule
    return disc


def discretize(ds, bins: int = 3, label_name: str = "label") -> tuple[DiscreteData, list]:
    """Discretize a :class:`~riga.data.TabularDataset`; returns the data and
    the names of constant columns left out of structure search."""
    disc = fit_discretizer(ds.rows, ds.feature_names, bins)
    return disc.transform(ds.rows, ds.labels, label_name), list(disc.excluded)
