from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..nn import (
    Activation,
    Conv,
    Dense,
    Flatten,
    Network,
    NetworkSpec,
    NonFiniteError,
    as_tensor,
    conv_output_size,
    make_optimizer,
    train_step,
)


@dataclass(frozen=True)
class CnnConfig:
    conv_blocks: tuple = ((16, 3),)
    dense_widths: tuple = (64,)
    batch_size: int = 32
    epochs: int = 20
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not self.conv_blocks or not self.dense_widths:
            raise ValueError("need at least one conv block and one dense layer")


def cnn_spec(grid: int, cfg: CnnConfig) -> NetworkSpec:
    """Stride-2 conv blocks, then a dense head ending in two logits."""
    layers, ch, side = [], 1, grid
    for out_ch, k in cfg.conv_blocks:
        layers += [Conv(ch, out_ch, k, 2, k // 2), Activation("relu")]
        side = conv_output_size(side, k, 2, k // 2)
        ch = out_ch
    layers.append(Flatten())
    width = ch * side * side
    for w in cfg.dense_widths:
        layers += [Dense(width, w), Activation("relu")]
        width = w
    layers.append(Dense(width, 2))
    return NetworkSpec(tuple(layers), cfg.seed)


@dataclass
class CnnClassifier:
    config: CnnConfig
    network: Network
    losses: list

    @torch.no_grad()
    def scores(self, images) -> np.ndarray:
        x = as_tensor(np.asarray(images, dtype=np.float64)[:, None])
        return torch.softmax(self.network(x), dim=1)[:, 1].numpy()


def cnn_train(images, labels, cfg: CnnConfig = CnnConfig()) -> CnnClassifier:
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if not (np.any(labels == 0) and np.any(labels == 1)):
        raise ValueError("training images must contain both classes")
    net = Network(cnn_spec(images.shape[-1], cfg))
    opt = make_optimizer(net, "adam", cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    x_all = images[:, None]
    losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(labels.size)
        total = 0.0
        for b, start in enumerate(range(0, labels.size, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            try:
                total += train_step(net, "ce", (x_all[idx], labels[idx]), opt, b) * idx.size
            except NonFiniteError as exc:
                raise NonFiniteError(f"epoch {epoch}: {exc}") from None
        losses.append(total / labels.size)
    return CnnClassifier(cfg, net, losses)
