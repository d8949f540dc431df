"""Conditional GAN over flattened images; both networks see the class label."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..imgmap import clamp_unit
from ..nn import DTYPE, Activation, Dense, Network, NetworkSpec, he_uniform_, make_optimizer, seeded_generator
from .base import (
    TrainedGenerative,
    batches,
    check_loss,
    images_tensor,
    labels_tensor,
    noise,
    require_both_classes,
    sub_seeds,
)


@dataclass(frozen=True)
class CganConfig:
    epochs: int = 50
    batch_size: int = 64
    noise_dim: int = 100
    label_dim: int = 10
    generator_widths: tuple = (512, 1024)
    discriminator_widths: tuple = (1024, 512)
    learning_rate: float = 2e-4
    beta1: float = 0.5


def _dense_stack(widths, act: str, head: str | None, seed: int) -> Network:
    layers = []
    for a, b in zip(widths[:-1], widths[1:]):
        layers += [Dense(a, b), Activation(act)]
    layers = layers[:-1]
    if head:
        layers.append(Activation(head))
    return Network(NetworkSpec(tuple(layers), seed))


class ConditionalGenerator(torch.nn.Module):
    def __init__(self, pixels: int, cfg: CganConfig, seed: int):
        super().__init__()
        self.noise_dim = cfg.noise_dim
        self.label = torch.nn.Embedding(2, cfg.label_dim).to(DTYPE)
        he_uniform_(self.label, seeded_generator(seed + 1))
        self.body = _dense_stack((cfg.noise_dim + cfg.label_dim, *cfg.generator_widths, pixels), "relu", "sigmoid", seed)

    def forward(self, z, y):
        return self.body(torch.cat([z, self.label(y)], dim=1))


class ConditionalDiscriminator(torch.nn.Module):
    def __init__(self, pixels: int, cfg: CganConfig, seed: int):
        super().__init__()
        self.label = torch.nn.Embedding(2, cfg.label_dim).to(DTYPE)
        he_uniform_(self.label, seeded_generator(seed + 1))
        self.body = _dense_stack((pixels + cfg.label_dim, *cfg.discriminator_widths, 1), "leaky_relu", "sigmoid", seed)

    def forward(self, x, y):
        return self.body(torch.cat([x.reshape(x.shape[0], -1), self.label(y)], dim=1)).reshape(-1)


def discriminator_step(D, G, x, y, optimizer, generator: torch.Generator) -> float:
    fake = G(noise(generator, x.shape[0], G.noise_dim), y).detach()
    real_p, fake_p = D(x, y), D(fake, y)
    loss = F.binary_cross_entropy(real_p, torch.ones_like(real_p)) + F.binary_cross_entropy(
        fake_p, torch.zeros_like(fake_p)
    )
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return loss.item()


def cgan_train(images, labels, epochs: int | None = None, seed: int = 0, config: CganConfig = CganConfig()):
    if epochs is None:
        epochs = config.epochs
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    require_both_classes(labels)
    x_all = images_tensor(images).reshape(len(labels), -1)
    y_all = labels_tensor(labels)
    grid = int(round(np.sqrt(x_all.shape[1])))
    s_g, s_d, s_batch, s_noise = sub_seeds(seed, 4)
    G = ConditionalGenerator(x_all.shape[1], config, s_g % 2**31)
    D = ConditionalDiscriminator(x_all.shape[1], config, s_d % 2**31)
    betas = (config.beta1, 0.999)
    opt_g = make_optimizer(G, "adam", config.learning_rate, betas)
    opt_d = make_optimizer(D, "adam", config.learning_rate, betas)
    rng = np.random.default_rng(s_batch)
    gen = seeded_generator(s_noise)
    log = []
    for epoch in range(epochs):
        d_losses, g_losses = [], []
        for idx in batches(len(y_all), config.batch_size, rng):
            idx = torch.as_tensor(idx)
            x, y = x_all[idx], y_all[idx]
            d_loss = discriminator_step(D, G, x, y, opt_d, gen)
            if not np.isfinite(d_loss):
                check_loss(torch.tensor(d_loss), epoch, "discriminator loss")
            fake_p = D(G(noise(gen, x.shape[0], config.noise_dim), y), y)
            g_loss = F.binary_cross_entropy(fake_p, torch.ones_like(fake_p))
            check_loss(g_loss, epoch, "generator loss")
            opt_g.zero_grad()
            g_loss.backward()
            opt_g.step()
            d_losses.append(d_loss)
            g_losses.append(g_loss.item())
        log.append({"epoch": epoch, "d_loss": float(np.mean(d_losses)), "g_loss": float(np.mean(g_losses))})
    return TrainedGenerative("cgan", {"generator": G, "discriminator": D}, config, grid, seed, log)


@torch.no_grad()
def cgan_generate(model: TrainedGenerative, y: int, count: int, seed: int = 0) -> np.ndarray:
    """``count`` synthetic images of class ``y``, clamped to [0, 1]."""
    if model.kind != "cgan":
        raise ValueError(f"expected a cgan model, got {model.kind}")
    g = model.grid_size
    if count == 0:
        return np.zeros((0, g, g))
    G = model.modules["generator"]
    z = noise(seeded_generator(seed), count, G.noise_dim)
    out = G(z, torch.full((count,), int(y), dtype=torch.long)).numpy().reshape(count, g, g)
    images, n_clamped = clamp_unit(out)
    if n_clamped:
        model.warnings.append(f"clamped {n_clamped} generated intensities")
    return images
