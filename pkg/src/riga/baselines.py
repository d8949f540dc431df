"""Nearest-neighbour oversamplers (SMOTE, ADASYN) for the tabular baselines.

Both return only the synthetic rows; use :func:`riga.data.append_synthetic`
to add them to a training set.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .data import TabularDataset


class AllocationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class OversampleConfig:
    k_neighbors: int = 5
    seed: int = 0


def _neighbors(points: np.ndarray, queries: np.ndarray, k: int, exclude_self: bool) -> np.ndarray:
    """Indices of the k nearest ``points`` for each query (Euclidean).

    Ties are broken by index. With ``exclude_self`` the queries must be the
    points themselves and each point is removed from its own list.
    """
    d2 = cdist(queries, points, "sqeuclidean")
    if exclude_self:
        np.fill_diagonal(d2, np.inf)
    order = np.lexsort((np.broadcast_to(np.arange(points.shape[0]), d2.shape), d2), axis=1)
    return order[:, :k]


def _check(ds: TabularDataset, cfg: OversampleConfig) -> np.ndarray:
    minority = ds.rows[ds.labels == 1]
    if cfg.k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")
    if minority.shape[0] <= cfg.k_neighbors:
        raise ValueError(f"need more than k={cfg.k_neighbors} minority rows, have {minority.shape[0]}")
    return minority


def _interpolate(minority, base_idx, nn_idx, rng) -> np.ndarray:
    """x + lam * (x_nn - x) with one neighbour drawn per synthetic row."""
    pick = rng.integers(0, nn_idx.shape[1], size=base_idx.size)
    partner = nn_idx[base_idx, pick]
    lam = rng.uniform(0.0, 1.0, size=(base_idx.size, 1))
    x = minority[base_idx]
    return x + lam * (minority[partner] - x)


def smote(ds: TabularDataset, cfg: OversampleConfig = OversampleConfig()) -> np.ndarray:
    minority = _check(ds, cfg)
    n0, n1 = ds.class_counts()
    gap = max(n0 - n1, 0)
    rng = np.random.default_rng(cfg.seed)
    nn = _neighbors(minority, minority, cfg.k_neighbors, exclude_self=True)
    base = rng.integers(0, minority.shape[0], size=gap)
    return _interpolate(minority, base, nn, rng)


def largest_remainder(weights, total: int) -> np.ndarray:
    """Integer allocation of ``total`` proportional to ``weights``.

    Floors first, then hands the leftover units to the largest fractional
    parts; equal remainders go to the lower index.
    """
    w = np.asarray(weights, dtype=np.float64)
    share = w / w.sum() * total
    base = np.floor(share).astype(np.int64)
    left = total - int(base.sum())
    rem = share - base
    order = np.lexsort((np.arange(w.size), -rem))
    base[order[:left]] += 1
    return base


def adasyn_difficulty(ds: TabularDataset, k: int) -> np.ndarray:
    """Share of majority rows among each minority row's k nearest neighbours."""
    minority_idx = np.flatnonzero(ds.labels == 1)
    d2 = cdist(ds.rows[minority_idx], ds.rows, "sqeuclidean")
    d2[np.arange(minority_idx.size), minority_idx] = np.inf
    order = np.lexsort((np.broadcast_to(np.arange(ds.n_rows), d2.shape), d2), axis=1)[:, :k]
    return (ds.labels[order] == 0).sum(axis=1) / k


def adasyn_allocation(ds: TabularDataset, cfg: OversampleConfig = OversampleConfig()) -> np.ndarray:
    _check(ds, cfg)
    n0, n1 = ds.class_counts()
    gap = max(n0 - n1, 0)
    r = adasyn_difficulty(ds, cfg.k_neighbors)
    if r.sum() == 0:
        warnings.warn("no minority row has majority neighbours; allocating uniformly", AllocationWarning, stacklevel=2)
        r = np.ones_like(r)
    return largest_remainder(r, gap)


def adasyn(ds: TabularDataset, cfg: OversampleConfig = OversampleConfig()) -> np.ndarray:
    minority = _check(ds, cfg)
    counts = adasyn_allocation(ds, cfg)
    rng = np.random.default_rng(cfg.seed)
    nn = _neighbors(minority, minority, cfg.k_neighbors, exclude_self=True)
    base = np.repeat(np.arange(minority.shape[0]), counts)
    return _interpolate(minority, base, nn, rng)
