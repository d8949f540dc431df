"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports from ``riga``; each function recomputes its answer from
definitions with plain loops so it can disagree with the library.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def auc_pairwise(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def nearest_index(z, entries) -> int:
    best, best_d = None, None
    for k, e in enumerate(entries):
        d = sum((float(a) - float(b)) ** 2 for a, b in zip(z, e))
        if best_d is None or d < best_d:
            best, best_d = k, d
    return best


def nearest_free_cell(target, free) -> tuple[int, int]:
    g = len(free)
    best, best_key = None, None
    for r in range(g):
        for c in range(g):
            if not free[r][c]:
                continue
            key = ((r - target[0]) ** 2 + (c - target[1]) ** 2, r, c)
            if best_key is None or key < best_key:
                best, best_key = (r, c), key
    return best


def central_difference(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    out = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        up, down = x.copy(), x.copy()
        up[i] += eps
        down[i] -= eps
        out[i] = (f(up) - f(down)) / (2 * eps)
    return out


def perplexity_of(dist_row, beta: float) -> float:
    w = [math.exp(-beta * (d - min(dist_row))) for d in dist_row]
    s = sum(w)
    p = [x / s for x in w]
    h = -sum(q * math.log(q) for q in p if q > 0)
    return math.exp(h)


def bic_oracle(columns, cards, parents: dict) -> float:
    """BIC = sum over families of (loglik - 0.5 * free params * ln N)."""
    n = len(columns[0])
    total = 0.0
    for v, pa in parents.items():
        pa = sorted(pa)
        joint, marg = {}, {}
        for row in range(n):
            key = tuple(columns[p][row] for p in pa)
            joint[key + (columns[v][row],)] = joint.get(key + (columns[v][row],), 0) + 1
            marg[key] = marg.get(key, 0) + 1
        ll = sum(c * math.log(c / marg[k[:-1]]) for k, c in joint.items())
        q = 1
        for p in pa:
            q *= cards[p]
        total += ll - 0.5 * (cards[v] - 1) * q * math.log(n)
    return total


def all_dags(n: int):
    """Every DAG on ``n`` labelled nodes as a frozenset of (u, v) edges."""
    pairs = list(itertools.combinations(range(n), 2))
    for choice in itertools.product((None, 0, 1), repeat=len(pairs)):
        edges = set()
        for (a, b), c in zip(pairs, choice):
            if c == 0:
                edges.add((a, b))
            elif c == 1:
                edges.add((b, a))
        if _acyclic(n, edges):
            yield frozenset(edges)


def _acyclic(n, edges) -> bool:
    indeg = [0] * n
    for _, v in edges:
        indeg[v] += 1
    stack = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while stack:
        u = stack.pop()
        seen += 1
        for a, b in edges:
            if a == u:
                indeg[b] -= 1
                if indeg[b] == 0:
                    stack.append(b)
    return seen == n


def equivalence_key(n: int, edges) -> tuple:
    """Skeleton plus unshielded colliders: equal keys mean Markov equivalent."""
    edges = set(edges)
    skel = frozenset(frozenset(e) for e in edges)
    colliders = set()
    for v in range(n):
        pa = sorted(u for u, w in edges if w == v)
        for a, b in itertools.combinations(pa, 2):
            if frozenset((a, b)) not in skel:
                colliders.add((a, v, b))
    return skel, frozenset(colliders)


def blanket_oracle(n: int, edges, t: int) -> set:
    out = set()
    for u, v in edges:
        if v == t:
            out.add(u)
        if u == t:
            out.add(v)
            out |= {a for a, b in edges if b == v and a != t}
    return out


def largest_remainder(weights, total: int) -> list[int]:
    s = sum(weights)
    shares = [w / s * total for w in weights]
    base = [math.floor(x) for x in shares]
    left = total - sum(base)
    ranked = sorted(range(len(weights)), key=lambda i: (-(shares[i] - base[i]), i))
    for i in ranked[:left]:
        base[i] += 1
    return base


def on_segment(s, a, b, tol=1e-9) -> bool:
    s, a, b = (np.asarray(v, dtype=np.float64) for v in (s, a, b))
    return abs(np.linalg.norm(s - a) + np.linalg.norm(s - b) - np.linalg.norm(a - b)) <= tol
