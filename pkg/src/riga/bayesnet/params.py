"""Conditional probability tables and ancestral sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discrete import DiscreteData
from .graph import Dag
from .score import family_counts


@dataclass(frozen=True)
class Cpt:
    """``tables[v][j, k]`` = P(v = k | parents(v) in configuration j).

    Configurations enumerate the sorted parent indices in mixed radix, the
    first parent varying slowest.
    """

    tables: tuple
    cardinalities: tuple

    def __post_init__(self):
        for v, t in enumerate(self.tables):
            t = np.asarray(t, dtype=np.float64)
            if t.ndim != 2 or t.shape[1] != self.cardinalities[v]:
                raise ValueError(f"table {v} has shape {t.shape}")
            if np.any(t < 0) or not np.allclose(t.sum(axis=1), 1.0, atol=1e-9, rtol=0):
                raise ValueError(f"table {v} rows must be distributions")

    def table(self, v: int) -> np.ndarray:
        return np.asarray(self.tables[v])


def fit_cpts(data: DiscreteData, dag: Dag, alpha: float = 1.0) -> Cpt:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    tables = []
    for v, ps in enumerate(dag.parents):
        counts = family_counts(data, v, ps).astype(np.float64) + alpha
        totals = counts.sum(axis=1, keepdims=True)
        r = counts.shape[1]
        with np.errstate(invalid="ignore", divide="ignore"):
            probs = np.where(totals > 0, counts / totals, 1.0 / r)
        tables.append(probs)
    return Cpt(tuple(tables), tuple(data.cardinalities))


def sample_from_bn(dag: Dag, cpt: Cpt, n: int, seed: int) -> DiscreteData:
    cards = cpt.cardinalities
    if len(cards) != dag.n_nodes:
        raise ValueError("CPT does not match the DAG")
    rng = np.random.default_rng(seed)
    out = np.zeros((n, dag.n_nodes), dtype=np.int64)
    for v in dag.topological_order():
        cfg = np.zeros(n, dtype=np.int64)
        for p in sorted(dag.parents[v]):
            cfg = cfg * cards[p] + out[:, p]
        cum = np.cumsum(cpt.table(v), axis=1)[cfg]
        u = rng.random(n)
        out[:, v] = np.minimum((u[:, None] >= cum).sum(axis=1), cards[v] - 1)
    return DiscreteData(out, cards, dag.names)
