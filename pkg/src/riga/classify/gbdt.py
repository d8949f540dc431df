"""Second-order gradient-boosted regression trees for logistic loss.

Splits are exact greedy searches over the sorted unique values of every
feature, scored with

    gain = 1/2 * [GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam)]

and leaves take the Newton step -G/(H+lam), shrunk by the learning rate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class GbdtConfig:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 1
    reg_lambda: float = 1.0
    subsample: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.n_trees < 0:
            raise ValueError("n_trees must be >= 0")


@dataclass
class Node:
    value: float = 0.0
    feature: int = -1
    threshold: float = 0.0
    gain: float = 0.0
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def logistic_grad_hess(margin: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = expit(margin)
    return p - y, p * (1.0 - p)


def split_gain(gl, hl, gr, hr, lam):
    g, h = gl + gr, hl + hr
    return 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - g * g / (h + lam))


def best_split(x_sorted, order, g, h, members, lam, min_leaf):
    """Best (gain, feature, threshold) for the rows flagged in ``members``.

    ``order`` holds every feature's row order sorted by value (d x N) and
    ``x_sorted`` the matching values. Because every feature row contains the
    same member set, masking keeps a rectangular (d x n) layout.
    """
    keep = members[order]
    n = int(members.sum())
    d = order.shape[0]
    idx = order[keep].reshape(d, n)
    xs = x_sorted[keep].reshape(d, n)
    gl = np.cumsum(g[idx], axis=1)[:, :-1]
    hl = np.cumsum(h[idx], axis=1)[:, :-1]
    G, H = g[idx[0]].sum(), h[idx[0]].sum()
    gain = split_gain(gl, hl, G - gl, H - hl, lam)
    counts = np.arange(1, n)
    valid = (xs[:, 1:] > xs[:, :-1]) & (counts >= min_leaf) & (n - counts >= min_leaf)
    gain = np.where(valid, gain, -np.inf)
    if gain.size == 0:
        return -np.inf, -1, 0.0
    flat = int(np.argmax(gain))
    f, pos = divmod(flat, n - 1)
    best = float(gain[f, pos])
    if not np.isfinite(best):
        return -np.inf, -1, 0.0
    lo, hi = xs[f, pos], xs[f, pos + 1]
    threshold = 0.5 * (lo + hi)
    if not lo < threshold:
        threshold = hi
    return best, f, float(threshold)


@dataclass
class GbdtModel:
    config: GbdtConfig
    base_margin: float
    trees: list = field(default_factory=list)

    def margin(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.full(x.shape[0], self.base_margin)
        for tree in self.trees:
            out += _predict_tree(tree, x)
        return out

    def predict_proba(self, x) -> np.ndarray:
        return expit(self.margin(x))

    def scores(self, x) -> np.ndarray:
        return self.predict_proba(x)


def _predict_tree(node: Node, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0])
    stack = [(node, np.arange(x.shape[0]))]
    while stack:
        nd, rows = stack.pop()
        if nd.is_leaf:
            out[rows] = nd.value
            continue
        go_left = x[rows, nd.feature] < nd.threshold
        stack.append((nd.left, rows[go_left]))
        stack.append((nd.right, rows[~go_left]))
    return out


def gbdt_train(train, cfg: GbdtConfig = GbdtConfig()) -> GbdtModel:
    """Fit on a :class:`~riga.data.TabularDataset`."""
    return fit_boosted_trees(train.rows, train.labels, cfg)


def fit_boosted_trees(x, y, cfg: GbdtConfig = GbdtConfig()) -> GbdtModel:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if not (np.any(y == 0) and np.any(y == 1)):
        raise ValueError("training data must contain both classes")
    prior = y.mean()
    model = GbdtModel(cfg, float(np.log(prior / (1.0 - prior))))
    if np.all(x.max(axis=0) == x.min(axis=0)):
        return model
    order = np.argsort(x, axis=0, kind="mergesort").T.copy()
    x_sorted = np.take_along_axis(x.T, order, axis=1)
    margin = np.full(y.size, model.base_margin)
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.n_trees):
        g, h = logistic_grad_hess(margin, y)
        if cfg.subsample < 1.0:
            members = rng.random(y.size) < cfg.subsample
        else:
            members = np.ones(y.size, dtype=bool)
        tree = build_tree(x_sorted, order, g, h, members, cfg)
        model.trees.append(tree)
        margin += _predict_tree(tree, x)
    return model


def build_tree(x_sorted, order, g, h, members, cfg: GbdtConfig) -> Node:
    stack = []

    def make(mask, depth):
        G, H = g[mask].sum(), h[mask].sum()
        node = Node(value=-cfg.learning_rate * G / (H + cfg.reg_lambda))
        if depth < cfg.max_depth and mask.sum() >= 2 * cfg.min_samples_leaf:
            gain, f, thr = best_split(x_sorted, order, g, h, mask, cfg.reg_lambda, cfg.min_samples_leaf)
            if f >= 0 and gain > 0.0:
                node.feature, node.threshold, node.gain = f, thr, gain
                stack.append((node, mask, depth))
        return node

    root = make(members, 0)
    while stack:
        node, mask, depth = stack.pop()
        col = np.empty(mask.size, dtype=bool)
        col[order[node.feature]] = x_sorted[node.feature] < node.threshold
        node.left = make(mask & col, depth + 1)
        node.right = make(mask & ~col, depth + 1)
    return root
