"""Tabu search over DAGs with single-edge moves."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discrete import DiscreteData
from .graph import Dag
from .score import FamilyScorer

_KIND_ORDER = {"add": 0, "delete": 1, "reverse": 2}


@dataclass(frozen=True, order=True)
class Move:
    kind: str
    u: int
    v: int  # the move concerns the edge u -> v

    def apply(self, dag: Dag) -> Dag:
        if self.kind == "add":
            return dag.add_edge(self.u, self.v)
        if self.kind == "delete":
            return dag.remove_edge(self.u, self.v)
        return dag.reverse_edge(self.u, self.v)

    def inverse(self) -> "Move":
        if self.kind == "add":
            return Move("delete", self.u, self.v)
        if self.kind == "delete":
            return Move("add", self.u, self.v)
        return Move("reverse", self.v, self.u)

    def sort_key(self):
        return (_KIND_ORDER[self.kind], self.u, self.v)


def neighbor_moves(dag: Dag, max_parents: int | None = None) -> list[Move]:
    """Every legal addition, deletion and reversal, in a fixed order:
    additions, then deletions, then reversals, each by (u, v)."""
    n = dag.n_nodes
    reach = dag.reachability()
    adds, dels, revs = [], [], []
    for u in range(n):
        kids = [w for w in range(n) if dag.has_edge(u, w)]
        for v in range(n):
            if u == v:
                continue
            if dag.has_edge(u, v):
                dels.append(Move("delete", u, v))
                # u -> v can flip unless another path u ~> v exists
                if not any(reach[w, v] for w in kids if w != v):
                    if max_parents is None or len(dag.parents[u]) < max_parents:
                        revs.append(Move("reverse", u, v))
            elif not dag.has_edge(v, u) and not reach[v, u]:
                if max_parents is None or len(dag.parents[v]) < max_parents:
                    adds.append(Move("add", u, v))
    return adds + dels + revs


def move_delta(scorer: FamilyScorer, dag: Dag, move: Move) -> float:
    u, v = move.u, move.v
    pv = dag.parents[v]
    if move.kind == "add":
        return scorer(v, pv | {u}) - scorer(v, pv)
    if move.kind == "delete":
        return scorer(v, pv - {u}) - scorer(v, pv)
    pu = dag.parents[u]
    return scorer(v, pv - {u}) - scorer(v, pv) + scorer(u, pu | {v}) - scorer(u, pu)


@dataclass(frozen=True)
class SearchConfig:
    max_iters: int = 1000
    tenure: int = 10
    restarts: int = 3
    seed: int = 0
    patience: int = 50
    perturb_moves: int = 3
    max_parents: int | None = None

    def __post_init__(self):
        if self.tenure < 0:
            raise ValueError("tenure must be >= 0")
        if self.max_iters < 0 or self.restarts < 0:
            raise ValueError("max_iters and restarts must be >= 0")


@dataclass
class SearchResult:
    dag: Dag
    score: float
    trace: list = field(default_factory=list)


def _edges_after(edges: frozenset, move: Move) -> frozenset:
    e = (move.u, move.v)
    if move.kind == "add":
        return edges | {e}
    if move.kind == "delete":
        return edges - {e}
    return (edges - {e}) | {(move.v, move.u)}


def _tabu_run(scorer, start: Dag, start_score: float, cfg: SearchConfig, trace: list):
    dag, score = start, start_score
    best_dag, best_score = dag, score
    edges = frozenset(dag.edges())
    # undoing a move is tabu, and so is returning to a recently visited
    # graph by any other route (three moves can close a cycle)
    tabu: dict = {}
    visited: dict = {edges: cfg.tenure - 1}
    stale = 0
    for it in range(cfg.max_iters):
        chosen, chosen_delta = None, -np.inf
        for move in neighbor_moves(dag, cfg.max_parents):
            delta = move_delta(scorer, dag, move)
            forbidden = tabu.get(move, -1) >= it or visited.get(_edges_after(edges, move), -1) >= it
            if forbidden and score + delta <= best_score + 1e-12:
                continue  # tabu and no aspiration
            if delta > chosen_delta:
                chosen, chosen_delta = move, delta
        if chosen is None:
            break
        dag = chosen.apply(dag)
        edges = _edges_after(edges, chosen)
        score += chosen_delta
        if cfg.tenure > 0:
            tabu[chosen.inverse()] = it + cfg.tenure
            visited[edges] = it + cfg.tenure
        trace.append(score)
        if score > best_score + 1e-12:
            best_dag, best_score, stale = dag, score, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best_dag, best_score


def tabu_search(data: DiscreteData, cfg: SearchConfig = SearchConfig()) -> SearchResult:
    """Maximize BIC from the empty graph; later restarts perturb the best
    graph found so far with a few seeded random legal moves."""
    if data.n_vars < 2:
        raise ValueError("structure search needs at least two variables")
    scorer = FamilyScorer(data)
    empty = Dag.empty(data.names)
    trace: list = []
    best_dag, best_score = _tabu_run(scorer, empty, scorer.total(empty), cfg, trace)
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.restarts):
        dag = best_dag
        for _ in range(cfg.perturb_moves):
            moves = neighbor_moves(dag, cfg.max_parents)
            if not moves:
                break
            dag = moves[int(rng.integers(len(moves)))].apply(dag)
        cand, cand_score = _tabu_run(scorer, dag, scorer.total(dag), cfg, trace)
        if cand_score > best_score + 1e-12:
            best_dag, best_score = cand, cand_score
    # report the exact score rather than the accumulated deltas
    return SearchResult(best_dag, scorer.total(best_dag), trace)
