"""VQ autoencoder refined by a patch discriminator, plus a causal attention prior."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from ..imgmap import clamp_unit
from ..nn import Activation, Conv, Network, NetworkSpec, make_optimizer
from .base import TrainedGenerative, sub_seeds
from .priors import fit_code_prior, sample_codes, uniform_codes
from .vqvae import VqConfig, decode_code_grids, encode_codes, train_vq_autoencoder


@dataclass(frozen=True)
class VqganConfig:
    vq: VqConfig = field(default_factory=VqConfig)
    adversarial_weight: float = 0.1
    disc_channels: int = 16
    disc_learning_rate: float = 2e-4
    prior_width: int = 64
    prior_heads: int = 4
    prior_layers: int = 2
    collapse_patience: int = 10


def patch_discriminator(channels: int, seed: int) -> Network:
    c = channels
    return Network(
        NetworkSpec(
            (
                Conv(1, c, 4, 2, 1),
                Activation("leaky_relu"),
                Conv(c, 2 * c, 4, 2, 1),
                Activation("leaky_relu"),
                Conv(2 * c, 1, 3, 1, 1),
            ),
            seed,
        )
    )


class _Adversary:
    """Trains the discriminator on (real, reconstruction) and returns the
    weighted non-saturating generator loss for the autoencoder step."""

    def __init__(self, cfg: VqganConfig, seed: int):
        self.weight = cfg.adversarial_weight
        self.disc = patch_discriminator(cfg.disc_channels, seed % 2**31)
        self.opt = make_optimizer(self.disc, "adam", cfg.disc_learning_rate, (0.5, 0.999))
        self.epoch_acc: list[float] = []
        self.d_losses: dict[int, list] = {}
        self._correct = {}

    def __call__(self, x, parts, epoch):
        recon = parts["recon"]
        real_logit = self.disc(x)
        fake_logit = self.disc(recon.detach())
        d_loss = F.binary_cross_entropy_with_logits(
            real_logit, torch.ones_like(real_logit)
        ) + F.binary_cross_entropy_with_logits(fake_logit, torch.zeros_like(fake_logit))
        self.opt.zero_grad()
        d_loss.backward()
        self.opt.step()
        with torch.no_grad():
            real_ok = (real_logit.mean(dim=(1, 2, 3)) > 0).double()
            fake_ok = (fake_logit.mean(dim=(1, 2, 3)) < 0).double()
            tot = self._correct.setdefault(epoch, [0.0, 0])
            tot[0] += float(real_ok.sum() + fake_ok.sum())
            tot[1] += 2 * x.shape[0]
        self.d_losses.setdefault(epoch, []).append(d_loss.item())
        g_logit = self.disc(recon)
        return self.weight * F.binary_cross_entropy_with_logits(g_logit, torch.ones_like(g_logit))

    def accuracy(self, epoch: int) -> float:
        c, n = self._correct[epoch]
        return c / n


def vqgan_train(
    images,
    labels,
    epochs: int | None = None,
    codebook_K: int | None = None,
    adversarial_weight: float | None = None,
    seed: int = 0,
    config: VqganConfig = VqganConfig(),
    prior_epochs: int | None = None,
    pixel_mask=None,
) -> TrainedGenerative:
    vq = config.vq
    if codebook_K is not None:
        vq = VqConfig(**{**vq.__dict__, "codebook_size": codebook_K})
    if adversarial_weight is not None:
        config = VqganConfig(**{**config.__dict__, "adversarial_weight": adversarial_weight})
    config = VqganConfig(**{**config.__dict__, "vq": vq})
    if epochs is None:
        epochs = vq.epochs
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    # the autoencoder stream reuses `seed` so a zero adversarial weight
    # reproduces plain VQVAE training exactly
    _, s_disc, s_prior = sub_seeds(seed, 3)
    adversary = _Adversary(config, s_disc) if config.adversarial_weight != 0 else None
    model, log, warns, usage = train_vq_autoencoder(images, vq, epochs, seed, adversary, pixel_mask)
    if adversary is not None:
        streak = 0
        for entry in log:
            e = entry["epoch"]
            entry["d_loss"] = float(np.mean(adversary.d_losses[e]))
            entry["d_accuracy"] = adversary.accuracy(e)
            streak = streak + 1 if entry["d_accuracy"] == 1.0 else 0
            if streak == config.collapse_patience:
                warns.append(f"discriminator collapse: perfect accuracy for {streak} epochs ending at epoch {e}")
    out = TrainedGenerative(
        "vqgan",
        {"autoencoder": model},
        config,
        model.grid,
        seed,
        log,
        warns,
        {"usage": usage},
    )
    if adversary is not None:
        out.modules["discriminator"] = adversary.disc
    codes = encode_codes(out, images)
    out.modules["prior"] = fit_code_prior(
        codes,
        labels,
        vq.codebook_size,
        "transformer",
        vq.prior_epochs if prior_epochs is None else prior_epochs,
        s_prior,
        width=config.prior_width,
        heads=config.prior_heads,
        layers=config.prior_layers,
        learning_rate=vq.prior_learning_rate,
        class_balanced=vq.prior_class_balanced,
    )
    return out


def vqgan_generate(model: TrainedGenerative, y: int, count: int, seed: int = 0, sample_from: str = "prior") -> np.ndarray:
    """Synthetic images for class ``y``.

    ``sample_from="random"`` draws code grids uniformly instead of from the
    trained prior.
    """
    if model.kind != "vqgan":
        raise ValueError(f"expected a vqgan model, got {model.kind}")
    g = model.grid_size
    if count == 0:
        return np.zeros((0, g, g))
    prior = model.modules["prior"]
    if sample_from == "prior":
        codes = sample_codes(prior, y, count, seed)
    elif sample_from == "random":
        codes = uniform_codes(prior.K, prior.code_shape, count, seed)
    else:
        raise ValueError("sample_from must be 'prior' or 'random'")
    images, n_clamped = clamp_unit(decode_code_grids(model, codes))
    if n_clamped:
        model.warnings.append(f"clamped {n_clamped} generated intensities")
    return images
