"""Structure learning on original vs augmented data, with blanket reports."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .discrete import DiscreteData, fit_discretizer
from .graph import blanket_dot, blanket_report, markov_blanket, to_dot
from .search import SearchConfig, SearchResult, tabu_search


@dataclass(frozen=True)
class BnOptions:
    bins: int = 3
    max_features: int = 8
    target: str = "label"
    search: SearchConfig = field(default_factory=SearchConfig)


def mutual_information(a: np.ndarray, b: np.ndarray) -> float:
    """Plug-in mutual information (nats) between two category columns."""
    joint = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(joint, (a, b), 1.0)
    joint /= joint.sum()
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])))


def select_by_label_mi(data: DiscreteData, k: int) -> list[int]:
    """The k feature columns sharing most information with the last (label)
    column; ties keep the lower column index."""
    label = data.values[:, -1]
    scores = [mutual_information(data.values[:, j], label) for j in range(data.n_vars - 1)]
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    return sorted(order[:k])


@dataclass
class BnSide:
    result: SearchResult
    data: DiscreteData
    blanket: list

    def summary(self) -> dict:
        return {
            "bic": self.result.score,
            "n_rows": self.data.n_rows,
            "edges": [[self.data.names[u], self.data.names[v]] for u, v in self.result.dag.edges()],
            "blanket": self.blanket,
            "blanket_size": len(self.blanket),
        }


def learn_side(data: DiscreteData, options: BnOptions) -> BnSide:
    res = tabu_search(data, options.search)
    mb = sorted(data.names[i] for i in markov_blanket(res.dag, options.target))
    return BnSide(res, data, mb)


def compare_structures(original, augmented, options: BnOptions = BnOptions()) -> dict:
    """Learn a network on ``original`` and on ``augmented`` (both
    TabularDataset) over the same discretization and feature subset."""
    disc = fit_discretizer(original.rows, original.feature_names, options.bins)
    d0 = disc.transform(original.rows, original.labels, options.target)
    d1 = disc.transform(augmented.rows, augmented.labels, options.target)
    cols = select_by_label_mi(d0, options.max_features) + [d0.n_vars - 1]
    d0, d1 = d0.select(cols), d1.select(cols)
    before, after = learn_side(d0, options), learn_side(d1, options)
    return {
        "features": list(d0.names[:-1]),
        "excluded_constant": list(disc.excluded),
        "before": before,
        "after": after,
    }


def write_bn_outputs(out_dir, comparison: dict, target: str = "label") -> dict:
    """DOT graphs, JSON adjacency and text reports for both sides."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for side, title in (("before", "Markov blanket without augmentation"), ("after", "Markov blanket with augmentation")):
        s: BnSide = comparison[side]
        dag = s.result.dag
        files = {
            "dot": out_dir / f"bn_{side}.dot",
            "json": out_dir / f"bn_{side}.json",
            "blanket_dot": out_dir / f"blanket_{side}.dot",
            "blanket_txt": out_dir / f"blanket_{side}.txt",
        }
        files["dot"].write_text(to_dot(dag, highlight=[target]))
        dag.save_json(files["json"])
        files["blanket_dot"].write_text(blanket_dot(dag, target, title))
        files["blanket_txt"].write_text(f"BIC: {s.result.score:.4f}\n" + blanket_report(dag, target))
        paths[side] = {k: str(v) for k, v in files.items()}
    return paths
