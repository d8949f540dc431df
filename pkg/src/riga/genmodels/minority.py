"""Balance a training fold with generated minority rows."""
from __future__ import annotations

import numpy as np

from ..data import TabularDataset
from ..imgmap import PixelMapping, from_images
from .base import TrainedGenerative
from .cgan import cgan_generate
from .priors import PriorModel
from .vqgan import vqgan_generate
from .vqvae import vqvae_generate


def generate_images(model: TrainedGenerative, y: int, count: int, seed: int, prior: PriorModel | None = None) -> np.ndarray:
    if model.kind == "cgan":
        return cgan_generate(model, y, count, seed)
    if model.kind == "vqvae":
        if prior is None:
            raise ValueError("a trained prior is required to sample from a VQVAE")
        return vqvae_generate(model, prior, y, count, seed)
    if model.kind == "vqgan":
        return vqgan_generate(model, y, count, seed)
    raise ValueError(f"unknown model kind {model.kind!r}")


def balance_gap(ds: TabularDataset) -> int:
    n0, n1 = ds.class_counts()
    return max(n0 - n1, 0)


def generate_minority(
    model: TrainedGenerative,
    train: TabularDataset,
    mapping: PixelMapping,
    seed: int,
    prior: PriorModel | None = None,
) -> np.ndarray:
    """Exactly ``majority - minority`` synthetic class-1 rows in original units.

    Generated images are already clamped to [0, 1], so after inversion and
    denormalization each value lies inside the training range of its
    feature. Combine with :func:`riga.data.append_synthetic`.
    """
    if mapping.norm is None:
        raise ValueError("mapping must carry normalization parameters")
    count = balance_gap(train)
    if count == 0:
        return np.zeros((0, train.n_features))
    images = generate_images(model, 1, count, seed, prior)
    rows = from_images(images, mapping, denormalize=True)
    return np.clip(rows, mapping.norm.min, mapping.norm.max)
