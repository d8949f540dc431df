"""Decomposable BIC scoring.

    BIC(G; D) = sum_v [ sum_jk N_vjk ln(N_vjk / N_vj) ] - (d / 2) ln N,
    d = sum_v (r_v - 1) q_v

Higher is better. 0 ln 0 is taken as 0.
"""
from __future__ import annotations

import math

import numpy as np

from .discrete import DiscreteData
from .graph import Dag


def _config_index(values: np.ndarray, cols, cards) -> np.ndarray:
    idx = np.zeros(values.shape[0], dtype=np.int64)
    for c in cols:
        idx = idx * cards[c] + values[:, c]
    return idx


def family_counts(data: DiscreteData, child: int, parents) -> np.ndarray:
    """(q, r) table of counts N_jk, parent configurations in mixed-radix
    order over the sorted parent indices."""
    parents = sorted(parents)
    q = math.prod(data.cardinalities[p] for p in parents)
    r = data.cardinalities[child]
    key = _config_index(data.values, parents, data.cardinalities) * r + data.values[:, child]
    return np.bincount(key, minlength=q * r).reshape(q, r)


def _xlogx(n: np.ndarray) -> float:
    n = n[n > 0].astype(np.float64)
    return float(np.sum(n * np.log(n)))


def family_loglik(data: DiscreteData, child: int, parents) -> float:
    parents = sorted(parents)
    r = data.cardinalities[child]
    cfg = _config_index(data.values, parents, data.cardinalities)
    _, n_jk = np.unique(cfg * r + data.values[:, child], return_counts=True)
    _, n_j = np.unique(cfg, return_counts=True)
    return _xlogx(n_jk) - _xlogx(n_j)


def family_params(data: DiscreteData, child: int, parents) -> int:
    q = math.prod(data.cardinalities[p] for p in parents)
    return (data.cardinalities[child] - 1) * q


def family_score(data: DiscreteData, child: int, parents) -> float:
    n = data.n_rows
    penalty = 0.5 * family_params(data, child, parents) * math.log(n) if n > 0 else 0.0
    return family_loglik(data, child, parents) - penalty


def _check(data: DiscreteData, dag: Dag) -> None:
    if tuple(dag.names) != tuple(data.names):
        raise ValueError("DAG nodes do not match data columns")


def bic_score(data: DiscreteData, dag: Dag) -> float:
    _check(data, dag)
    return float(sum(family_score(data, v, ps) for v, ps in enumerate(dag.parents)))


def loglik(data: DiscreteData, dag: Dag) -> float:
    _check(data, dag)
    return float(sum(family_loglik(data, v, ps) for v, ps in enumerate(dag.parents)))


class FamilyScorer:
    """Memoized family scores; safe to share across a single search."""

    def __init__(self, data: DiscreteData):
        self.data = data
        self._cache: dict = {}

    def __call__(self, child: int, parents) -> float:
        key = (child, frozenset(parents))
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = family_score(self.data, child, key[1])
        return hit

    def total(self, dag: Dag) -> float:
        return float(sum(self(v, ps) for v, ps in enumerate(dag.parents)))
