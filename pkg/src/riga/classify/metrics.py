from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.stats import rankdata


def auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    Ties get average ranks, which counts each tied positive/negative pair
    as one half.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    pos = labels == 1
    n1 = int(pos.sum())
    n0 = labels.size - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC needs both classes present")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """False- and true-positive rates at every distinct threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    distinct = np.r_[np.flatnonzero(np.diff(s)), y.size - 1]
    tp = np.cumsum(y == 1)[distinct]
    fp = np.cumsum(y == 0)[distinct]
    tpr = np.r_[0.0, tp / max(tp[-1], 1)]
    fpr = np.r_[0.0, fp / max(fp[-1], 1)]
    return fpr, tpr


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def write_roc_svg(path, curves: dict, size: int = 320) -> None:
    """ROC polylines, one per named (fpr, tpr) pair, on a unit square."""
    m = 30
    span = size - 2 * m
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="{m}" y="{m}" width="{span}" height="{span}" fill="none" stroke="#444"/>',
        f'<line x1="{m}" y1="{m + span}" x2="{m + span}" y2="{m}" stroke="#bbb" stroke-dasharray="4 3"/>',
    ]
    for i, (name, (fpr, tpr)) in enumerate(curves.items()):
        pts = " ".join(f"{m + x * span:.2f},{m + (1 - y) * span:.2f}" for x, y in zip(fpr, tpr))
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"><title>{name}</title></polyline>')
        parts.append(f'<text x="{m + 6}" y="{m + 14 + 14 * i}" font-size="11" fill="{color}">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))
