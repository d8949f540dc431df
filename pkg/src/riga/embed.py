"""Exact t-SNE over the features (columns) of a data matrix.

Features become points: the matrix is transposed so each feature is a
vector of its values across samples, and the 2-D embedding of those vectors
decides where the feature lands on the pixel grid.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class EmbeddingError(RuntimeError):
    pass


@dataclass(frozen=True)
class EmbeddingConfig:
    perplexity: float = 30.0
    learning_rate: float = 200.0
    iterations: int = 1000
    early_exaggeration_factor: float = 12.0
    exaggeration_iters: int = 250
    momentum: float = 0.5
    final_momentum: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not self.iterations >= self.exaggeration_iters >= 0:
            raise ValueError("need iterations >= exaggeration_iters >= 0")
        if self.perplexity <= 1.0:
            raise ValueError("perplexity must exceed 1")


@dataclass(frozen=True)
class FeatureEmbedding:
    positions: np.ndarray
    final_kl: float
    exaggeration_kl: float = float("nan")
    perplexity: float = float("nan")
    kl_trace: tuple = field(default=(), repr=False)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError("positions must be d x 2")
        if not np.isfinite(pos).all():
            raise ValueError("non-finite embedding coordinates")
        object.__setattr__(self, "positions", pos)


def effective_perplexity(perplexity: float, d: int) -> float:
    """Clamp the perplexity so it is attainable with ``d - 1`` neighbours."""
    cap = (d - 1) / 3.0
    if cap > 1.0:
        return min(perplexity, cap)
    return min(perplexity, d / 2.0)


def squared_distances(points: np.ndarray) -> np.ndarray:
    sq = np.sum(points * points, axis=1)
    dist = sq[:, None] + sq[None, :] - 2.0 * points @ points.T
    np.maximum(dist, 0.0, out=dist)
    np.fill_diagonal(dist, 0.0)
    return dist


def _row_distribution(dist_row: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    shifted = dist_row - dist_row.min()
    w = np.exp(-shifted * beta)
    total = w.sum()
    p = w / total
    nz = p > 0
    entropy = -np.sum(p[nz] * np.log(p[nz]))
    return p, float(entropy)


def conditional_affinities(
    dist: np.ndarray, perplexity: float, tol: float = 1e-4, max_steps: int = 200
) -> tuple[np.ndarray, np.ndarray]:
    """Row-conditional Gaussian affinities and their precisions ``beta = 1/(2 sigma^2)``.

    For each row the precision is bisected until ``exp(H)`` is within ``tol``
    of the target perplexity.
    """
    d = dist.shape[0]
    cond = np.zeros((d, d))
    betas = np.zeros(d)
    log_target = np.log(perplexity)
    for i in range(d):
        others = np.r_[0:i, i + 1 : d]
        row = dist[i, others]
        spread = row.max() - row.min()
        if spread == 0.0:
            # equidistant neighbours give a uniform row for every beta
            cond[i, others] = 1.0 / others.size
            betas[i] = 0.0
            continue
        ties = row == row.min()
        if ties.sum() >= perplexity - tol:
            # duplicated features: the perplexity can never drop below the
            # tie count, so take the beta -> inf limit
            cond[i, others] = ties / ties.sum()
            betas[i] = np.inf
            continue
        beta, lo, hi = 1.0 / spread, 0.0, np.inf
        for _ in range(max_steps):
            p, h = _row_distribution(row, beta)
            if abs(np.exp(h) - perplexity) <= tol:
                break
            if h > log_target:
                lo = beta
                beta = beta * 2.0 if np.isinf(hi) else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
        else:
            raise EmbeddingError(f"perplexity bisection did not converge for feature {i}")
        cond[i, others] = p
        betas[i] = beta
    return cond, betas


def calibrate_affinities(feature_matrix, perplexity: float) -> np.ndarray:
    """Symmetric joint affinities over the rows of ``feature_matrix`` (d x n)."""
    x = np.asarray(feature_matrix, dtype=np.float64)
    d = x.shape[0]
    if d < 3:
        raise ValueError("need at least 3 features")
    if not perplexity < d:
        raise ValueError("perplexity must be below the number of features")
    cond, _ = conditional_affinities(squared_distances(x), perplexity)
    joint = (cond + cond.T) / (2.0 * d)
    np.fill_diagonal(joint, 0.0)
    return joint / joint.sum()


def _student_kernel(y: np.ndarray) -> np.ndarray:
    num = 1.0 / (1.0 + squared_distances(y))
    np.fill_diagonal(num, 0.0)
    return num


def kl_divergence(p: np.ndarray, y: np.ndarray) -> float:
    num = _student_kernel(y)
    q = num / num.sum()
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_gradient(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    num = _student_kernel(y)
    q = num / num.sum()
    w = (p - q) * num
    return 4.0 * (np.diag(w.sum(axis=1)) - w) @ y


def tsne_optimize(affinities, config: EmbeddingConfig = EmbeddingConfig()) -> FeatureEmbedding:
    p = np.asarray(affinities, dtype=np.float64)
    d = p.shape[0]
    rng = np.random.default_rng(config.seed)
    y = 1e-4 * rng.standard_normal((d, 2))
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)
    exaggeration_kl = kl_divergence(p, y) if config.exaggeration_iters == 0 else float("nan")
    trace = []
    for it in range(config.iterations):
        exaggerating = it < config.exaggeration_iters
        target = p * config.early_exaggeration_factor if exaggerating else p
        grad = kl_gradient(target, y)
        if not np.isfinite(grad).all():
            raise EmbeddingError(f"non-finite gradient at iteration {it}")
        momentum = config.momentum if it < config.exaggeration_iters else config.final_momentum
        same_sign = (grad > 0) == (velocity > 0)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        velocity = momentum * velocity - config.learning_rate * gains * grad
        y = y + velocity
        y = y - y.mean(axis=0)
        if it + 1 == config.exaggeration_iters:
            exaggeration_kl = kl_divergence(p, y)
        if (it + 1) % 50 == 0:
            trace.append(kl_divergence(p, y))
    final = kl_divergence(p, y)
    return FeatureEmbedding(y, max(final, 0.0), exaggeration_kl, kl_trace=tuple(trace))


def embed_features(normalized_rows, config: EmbeddingConfig = EmbeddingConfig()) -> FeatureEmbedding:
    """Embed the columns of an (N x d) normalized matrix in the plane.

    One or two features need no optimization; they are placed on a line.
    """
    x = np.asarray(normalized_rows, dtype=np.float64)
    d = x.shape[1]
    if d == 1:
        return FeatureEmbedding(np.zeros((1, 2)), 0.0, 0.0)
    if d == 2:
        return FeatureEmbedding(np.array([[0.0, 0.0], [1.0, 0.0]]), 0.0, 0.0)
    perp = effective_perplexity(config.perplexity, d)
    p = calibrate_affinities(x.T, perp)
    emb = tsne_optimize(p, replace(config, perplexity=perp))
    return replace(emb, perplexity=perp)


def write_embedding_csv(path, feature_names, embedding: FeatureEmbedding) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["feature_name", "x", "y"])
        for name, (x, y) in zip(feature_names, embedding.positions):
            w.writerow([name, repr(float(x)), repr(float(y))])


def read_embedding_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        next(r)
        rows = list(r)
    return [row[0] for row in rows], np.array([[float(row[1]), float(row[2])] for row in rows])
