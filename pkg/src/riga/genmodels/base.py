from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import torch

from ..nn import DTYPE, seeded_generator


class TrainingError(FloatingPointError):
    pass


@dataclass
class CodeBook:
    entries: np.ndarray
    usage_histogram: np.ndarray = None

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.float64)
        if self.entries.ndim != 2 or self.entries.shape[0] < 2:
            raise ValueError("codebook needs at least two entries")
        if not np.isfinite(self.entries).all():
            raise ValueError("non-finite codebook entry")
        if self.usage_histogram is None:
            self.usage_histogram = np.zeros(self.entries.shape[0], dtype=np.int64)

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @property
    def dim(self) -> int:
        return self.entries.shape[1]


def vq_quantize(z, codebook: CodeBook) -> int:
    """Index of the nearest codebook entry by squared Euclidean distance.

    Ties go to the lowest index. The usage histogram is incremented.
    """
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if z.shape[0] != codebook.dim:
        raise ValueError(f"vector has {z.shape[0]} dims, codebook has {codebook.dim}")
    diff = codebook.entries - z
    dist = np.einsum("kd,kd->k", diff, diff)
    k = int(np.argmin(dist))
    codebook.usage_histogram[k] += 1
    return k


@dataclass
class TrainedGenerative:
    kind: str
    modules: dict
    config: Any
    grid_size: int
    seed: int
    log: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def epochs_run(self) -> int:
        return len(self.log)


def sub_seeds(seed: int, n: int) -> list[int]:
    """Independent child seeds so separate parts of a model never share a stream."""
    return [int(s.generate_state(1, dtype=np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def images_tensor(images) -> torch.Tensor:
    x = torch.tensor(np.asarray(images, dtype=np.float64))
    if x.ndim == 3:
        x = x[:, None]
    return x.to(DTYPE)


def labels_tensor(labels) -> torch.Tensor:
    return torch.tensor(np.asarray(labels, dtype=np.int64).reshape(-1))


def batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def check_loss(value: torch.Tensor, epoch: int, what: str) -> None:
    if not torch.isfinite(value):
        raise TrainingError(f"non-finite {what} at epoch {epoch}")


def stack_samples(samples) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.stack([s.pixels for s in samples]) if samples else np.zeros((0, 0, 0)),
        np.array([s.label for s in samples], dtype=np.int64),
    )


def require_both_classes(labels) -> None:
    labels = np.asarray(labels)
    if not (np.any(labels == 0) and np.any(labels == 1)):
        raise ValueError("training images must contain both classes")


def noise(generator: torch.Generator, count: int, dim: int) -> torch.Tensor:
    return torch.randn(count, dim, generator=generator, dtype=DTYPE)


__all__ = [
    "CodeBook",
    "TrainedGenerative",
    "TrainingError",
    "vq_quantize",
    "seeded_generator",
]
