"""Fold-level transform fitting and minority augmentation.

Everything here sees only a training partition: normalization, the feature
embedding, the pixel mapping and the generative model are all fit on it.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import OversampleConfig, adasyn, smote
from .data import NormalizationParams, TabularDataset, normalize
from .embed import EmbeddingConfig, FeatureEmbedding, embed_features
from .genmodels import (
    CganConfig,
    VqConfig,
    VqganConfig,
    cgan_train,
    generate_minority,
    prior_train,
    vqgan_train,
    vqvae_train,
)
from .imgmap import GridTooSmallError, PixelMapping, build_mapping, minimum_grid, to_images
from .seeding import derive_seed

AUGMENTERS = ("none", "smote", "adasyn", "cgan", "vqvae", "vqgan")
GENERATIVE = ("cgan", "vqvae", "vqgan")


@dataclass(frozen=True)
class TransformConfig:
    grid_size: int = 28
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)


@dataclass(frozen=True)
class AugmentConfig:
    kind: str = "none"
    epochs: int = 50
    prior_epochs: int = 50
    prior_channels: int = 64
    codebook_K: int = 128
    learning_rate: float = 1e-2
    prior_learning_rate: float = 1e-2
    # weight prior loss by inverse class frequency (minority is ~10% of grids)
    prior_class_balanced: bool = True
    adversarial_weight: float = 0.1
    k_neighbors: int = 5

    def __post_init__(self):
        if self.kind not in AUGMENTERS:
            raise ValueError(f"augmenter must be one of {AUGMENTERS}, got {self.kind!r}")


@dataclass
class FoldTransform:
    norm: NormalizationParams
    embedding: FeatureEmbedding
    mapping: PixelMapping

    def images(self, rows) -> np.ndarray:
        """Rows in original units to images; values outside the training
        range are clipped into [0, 1] first."""
        return to_images(np.clip(self.norm.apply(rows), 0.0, 1.0), self.mapping)


def fit_transform(train: TabularDataset, cfg: TransformConfig, seed: int) -> FoldTransform:
    normalized, norm = normalize(train)
    if train.n_features > cfg.grid_size**2:
        raise GridTooSmallError(
            f"grid too small for lossless mapping: {train.n_features} features > {cfg.grid_size}x{cfg.grid_size} cells"
        )
    emb = embed_features(normalized.rows, replace(cfg.embedding, seed=seed))
    mapping = build_mapping(emb, cfg.grid_size, norm, train.feature_names)
    return FoldTransform(norm, emb, mapping)


@dataclass
class AugmentResult:
    rows: np.ndarray
    warnings: list = field(default_factory=list)
    log: list = field(default_factory=list)
    synthetic_images: np.ndarray | None = None


def _vq_config(cfg: AugmentConfig) -> VqConfig:
    return VqConfig(
        epochs=cfg.epochs,
        codebook_size=cfg.codebook_K,
        learning_rate=cfg.learning_rate,
        prior_epochs=cfg.prior_epochs,
        prior_learning_rate=cfg.prior_learning_rate,
        prior_class_balanced=cfg.prior_class_balanced,
    )


def augment(
    train: TabularDataset,
    cfg: AugmentConfig,
    transform: FoldTransform | None,
    seed: int,
) -> AugmentResult:
    """Synthetic minority rows (original units) that balance ``train``."""
    kind = cfg.kind
    if kind == "none":
        return AugmentResult(np.zeros((0, train.n_features)))
    if kind in ("smote", "adasyn"):
        fn = smote if kind == "smote" else adasyn
        return AugmentResult(fn(train, OversampleConfig(cfg.k_neighbors, seed)))
    if transform is None:
        raise ValueError(f"{kind} needs a fitted image transform")
    real = to_images(transform.norm.apply(train.rows), transform.mapping)
    labels = train.labels
    # unmapped cells are discarded by the inverse, so they carry no loss
    active = transform.mapping.active_mask()
    s_train, s_prior, s_gen = (derive_seed(seed, t) for t in ("train", "prior", "generate"))
    prior = None
    if kind == "cgan":
        model = cgan_train(real, labels, cfg.epochs, s_train, CganConfig(epochs=cfg.epochs))
    elif kind == "vqvae":
        vq = _vq_config(cfg)
        model = vqvae_train(real, cfg.epochs, cfg.codebook_K, s_train, vq, pixel_mask=active)
        prior = prior_train(model, real, labels, cfg.prior_epochs, s_prior, channels=cfg.prior_channels)
    else:
        vq = _vq_config(cfg)
        model = vqgan_train(
            real,
            labels,
            cfg.epochs,
            cfg.codebook_K,
            cfg.adversarial_weight,
            s_train,
            VqganConfig(vq=vq),
            pixel_mask=active,
        )
    rows = generate_minority(model, train, transform.mapping, s_gen, prior)
    images = transform.images(rows) if rows.shape[0] else None
    return AugmentResult(rows, list(model.warnings), list(model.log), images)


def grid_for(d: int, preferred: int = 28) -> int:
    return minimum_grid(d, preferred)
