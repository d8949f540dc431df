"""Directed acyclic graphs over named discrete variables."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class CycleError(ValueError):
    pass


@dataclass(frozen=True)
class Dag:
    names: tuple
    parents: tuple  # frozenset of parent indices per node

    def __post_init__(self):
        names = tuple(str(s) for s in self.names)
        if len(set(names)) != len(names):
            raise ValueError("node names must be unique")
        parents = tuple(frozenset(int(p) for p in ps) for ps in self.parents)
        if len(parents) != len(names):
            raise ValueError("one parent set per node is required")
        n = len(names)
        for v, ps in enumerate(parents):
            if any(p < 0 or p >= n for p in ps):
                raise ValueError(f"node {names[v]!r} has a parent outside the graph")
            if v in ps:
                raise CycleError(f"self-loop on {names[v]!r}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "parents", parents)
        self.topological_order()

    @classmethod
    def empty(cls, names) -> "Dag":
        names = tuple(names)
        return cls(names, tuple(frozenset() for _ in names))

    @classmethod
    def from_edges(cls, names, edges) -> "Dag":
        names = tuple(names)
        pos = {s: i for i, s in enumerate(names)}
        ps = [set() for _ in names]
        for u, v in edges:
            u = pos[u] if isinstance(u, str) else int(u)
            v = pos[v] if isinstance(v, str) else int(v)
            ps[v].add(u)
        return cls(names, tuple(frozenset(p) for p in ps))

    @property
    def n_nodes(self) -> int:
        return len(self.names)

    def index(self, node) -> int:
        if isinstance(node, str):
            try:
                return self.names.index(node)
            except ValueError:
                raise KeyError(f"unknown node {node!r}") from None
        node = int(node)
        if not 0 <= node < self.n_nodes:
            raise KeyError(f"unknown node {node}")
        return node

    def edges(self) -> list[tuple[int, int]]:
        return sorted((u, v) for v, ps in enumerate(self.parents) for u in ps)

    def has_edge(self, u: int, v: int) -> bool:
        return u in self.parents[v]

    def children(self, u: int) -> list[int]:
        return [v for v, ps in enumerate(self.parents) if u in ps]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=bool)
        for u, v in self.edges():
            a[u, v] = True
        return a

    def topological_order(self) -> list[int]:
        """Kahn's algorithm, smallest index first; raises on a cycle."""
        indeg = [len(ps) for ps in self.parents]
        kids = [[] for _ in self.parents]
        for v, ps in enumerate(self.parents):
            for p in ps:
                kids[p].append(v)
        ready = sorted(v for v, k in enumerate(indeg) if k == 0)
        order = []
        while ready:
            u = ready.pop(0)
            order.append(u)
            for v in kids[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    ready.append(v)
            ready.sort()
        if len(order) != self.n_nodes:
            raise CycleError("graph contains a directed cycle")
        return order

    def reachability(self) -> np.ndarray:
        """``r[u, v]`` is true when a directed path leads from u to v (u reaches itself)."""
        r = self.adjacency() | np.eye(self.n_nodes, dtype=bool)
        for k in range(self.n_nodes):
            r |= r[:, k : k + 1] & r[k : k + 1, :]
        return r

    def _with_parents(self, v: int, ps) -> "Dag":
        parents = list(self.parents)
        parents[v] = frozenset(ps)
        return Dag(self.names, tuple(parents))

    def add_edge(self, u: int, v: int) -> "Dag":
        return self._with_parents(v, self.parents[v] | {u})

    def remove_edge(self, u: int, v: int) -> "Dag":
        return self._with_parents(v, self.parents[v] - {u})

    def reverse_edge(self, u: int, v: int) -> "Dag":
        parents = list(self.parents)
        parents[v] = parents[v] - {u}
        parents[u] = parents[u] | {v}
        return Dag(self.names, tuple(parents))

    def to_json(self) -> dict:
        return {
            "nodes": list(self.names),
            "parents": {self.names[v]: sorted(self.names[p] for p in ps) for v, ps in enumerate(self.parents)},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Dag":
        names = tuple(obj["nodes"])
        edges = [(p, v) for v, ps in obj["parents"].items() for p in ps]
        return cls.from_edges(names, edges)

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))


def markov_blanket(dag: Dag, target) -> set[int]:
    """Parents, children and the children's other parents of ``target``."""
    t = dag.index(target)
    blanket = set(dag.parents[t])
    for c in dag.children(t):
        blanket.add(c)
        blanket |= dag.parents[c]
    blanket.discard(t)
    return blanket


def skeleton(dag: Dag) -> set[frozenset]:
    return {frozenset(e) for e in dag.edges()}


def v_structures(dag: Dag) -> set[tuple[int, int, int]]:
    """Colliders a -> c <- b with a and b non-adjacent, stored with a < b."""
    adj = skeleton(dag)
    out = set()
    for c, ps in enumerate(dag.parents):
        ps = sorted(ps)
        for i, a in enumerate(ps):
            for b in ps[i + 1 :]:
                if frozenset((a, b)) not in adj:
                    out.add((a, c, b))
    return out


def markov_equivalent(a: Dag, b: Dag) -> bool:
    """Same skeleton and same v-structures, i.e. the same CPDAG."""
    if a.names != b.names:
        return False
    return skeleton(a) == skeleton(b) and v_structures(a) == v_structures(b)


def _quote(s: str) -> str:
    return '"' + s.replace('"', '\\"') + '"'


def to_dot(dag: Dag, highlight=(), title: str | None = None) -> str:
    marked = {dag.index(h) for h in highlight}
    lines = ["digraph G {"]
    if title:
        lines.append(f"  label={_quote(title)};")
    for v, name in enumerate(dag.names):
        style = " [style=filled, fillcolor=lightblue]" if v in marked else ""
        lines.append(f"  {_quote(name)}{style};")
    for u, v in dag.edges():
        lines.append(f"  {_quote(dag.names[u])} -> {_quote(dag.names[v])};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def blanket_subgraph(dag: Dag, target) -> Dag:
    """The induced subgraph on the target and its blanket."""
    t = dag.index(target)
    keep = sorted(markov_blanket(dag, t) | {t})
    pos = {old: new for new, old in enumerate(keep)}
    names = tuple(dag.names[i] for i in keep)
    parents = tuple(frozenset(pos[p] for p in dag.parents[i] if p in pos) for i in keep)
    return Dag(names, parents)


def blanket_dot(dag: Dag, target, title: str | None = None) -> str:
    sub = blanket_subgraph(dag, target)
    return to_dot(sub, highlight=[dag.names[dag.index(target)]], title=title)


def blanket_report(dag: Dag, target) -> str:
    t = dag.index(target)
    name = dag.names[t]
    parents = sorted(dag.names[p] for p in dag.parents[t])
    kids = dag.children(t)
    coparents = sorted({dag.names[p] for c in kids for p in dag.parents[c]} - {name} - set(parents))
    blanket = sorted(dag.names[i] for i in markov_blanket(dag, t))
    return "\n".join(
        [
            f"target: {name}",
            f"parents ({len(parents)}): {', '.join(parents) or '-'}",
            f"children ({len(kids)}): {', '.join(sorted(dag.names[c] for c in kids)) or '-'}",
            f"co-parents ({len(coparents)}): {', '.join(coparents) or '-'}",
            f"markov blanket ({len(blanket)}): {', '.join(blanket) or '-'}",
        ]
    ) + "\n"
