"""Vector-quantized autoencoder with a straight-through gradient estimator.

The autoencoder itself is unconditional; class conditioning lives in the
code prior (see :mod:`riga.genmodels.priors`).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..nn import DTYPE, Activation, Conv, ConvTranspose, Network, NetworkSpec, make_optimizer, seeded_generator
from ..imgmap import clamp_unit
from .base import CodeBook, TrainedGenerative, batches, check_loss, images_tensor, sub_seeds
from .priors import PriorModel, fit_code_prior, sample_codes


@dataclass(frozen=True)
class VqConfig:
    epochs: int = 50
    batch_size: int = 64
    codebook_size: int = 128
    code_dim: int = 16
    hidden: int = 32
    beta: float = 0.25
    learning_rate: float = 1e-3
    prior_epochs: int = 50
    prior_learning_rate: float = 1e-3
    prior_class_balanced: bool = False


def padded_size(grid: int) -> int:
    return -(-grid // 4) * 4


class VQAutoencoder(torch.nn.Module):
    """Two stride-2 convolutions down to a (grid/4)^2 code map and back."""

    def __init__(self, grid: int, cfg: VqConfig, seed: int, pixel_mask=None):
        super().__init__()
        self.grid = grid
        # reconstruction is scored on these pixels only (all when None)
        mask = None if pixel_mask is None else torch.tensor(np.asarray(pixel_mask, dtype=bool))
        self.register_buffer("pixel_mask", mask)
        self.pad = padded_size(grid) - grid
        self.beta = cfg.beta
        s_enc, s_dec, s_code = sub_seeds(seed, 3)
        h, dim = cfg.hidden, cfg.code_dim
        self.encoder = Network(
            NetworkSpec((Conv(1, h, 4, 2, 1), Activation("relu"), Conv(h, dim, 4, 2, 1)), s_enc % 2**31)
        )
        self.decoder = Network(
            NetworkSpec(
                (ConvTranspose(dim, h, 4, 2, 1), Activation("relu"), ConvTranspose(h, 1, 4, 2, 1), Activation("sigmoid")),
                s_dec % 2**31,
            )
        )
        k = cfg.codebook_size
        init = (torch.rand(k, dim, generator=seeded_generator(s_code), dtype=DTYPE) * 2 - 1) / k
        self.codebook = torch.nn.Parameter(init)

    @property
    def code_shape(self) -> tuple[int, int]:
        side = padded_size(self.grid) // 4
        return side, side

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        if self.pad:
            x = F.pad(x, (0, self.pad, 0, self.pad))
        return self.encoder(x)

    def nearest(self, z_e: torch.Tensor) -> torch.Tensor:
        """Code indices for a (B, dim, h, w) map; (B, h, w) long."""
        b, dim, h, w = z_e.shape
        flat = z_e.detach().permute(0, 2, 3, 1).reshape(-1, dim)
        cb = self.codebook.detach()
        dist = (flat * flat).sum(1, keepdim=True) - 2 * flat @ cb.T + (cb * cb).sum(1)[None]
        return dist.argmin(1).reshape(b, h, w)

    def lookup(self, idx: torch.Tensor) -> torch.Tensor:
        return self.codebook[idx].permute(0, 3, 1, 2)

    def decode(self, z_q: torch.Tensor) -> torch.Tensor:
        out = self.decoder(z_q)
        return out[:, :, : self.grid, : self.grid]

    def decode_codes(self, idx: torch.Tensor) -> torch.Tensor:
        return self.decode(self.lookup(idx))

    def forward_parts(self, x: torch.Tensor, frozen: dict | None = None) -> dict:
        """Forward pass exposing every intermediate.

        With ``frozen`` (see :meth:`freeze`) the quantizer is replaced by the
        fixed offset of a previous call and every stop-gradient operand by
        its value there. The result is a smooth surrogate whose true gradient
        equals the straight-through gradient at the frozen point, which is
        what finite differences need.
        """
        z_e = self.encode(x)
        if frozen is None:
            idx = self.nearest(z_e)
            offset = None
        else:
            idx = frozen["idx"]
            offset = frozen["offset"]
        z_q = self.lookup(idx)
        if offset is None:
            offset = (z_q - z_e).detach()
        decoder_in = z_e + offset
        recon = self.decode(decoder_in)
        if self.pixel_mask is None:
            rec = F.mse_loss(recon, x)
        else:
            rec = F.mse_loss(recon[..., self.pixel_mask], x[..., self.pixel_mask])
        sg_e = z_e.detach() if frozen is None else frozen["z_e"]
        sg_q = z_q.detach() if frozen is None else frozen["z_q"]
        codebook_loss = F.mse_loss(z_q, sg_e)
        commitment = F.mse_loss(z_e, sg_q)
        total = rec + codebook_loss + self.beta * commitment
        return {
            "z_e": z_e,
            "idx": idx,
            "z_q": z_q,
            "offset": offset,
            "decoder_in": decoder_in,
            "recon": recon,
            "recon_loss": rec,
            "codebook_loss": codebook_loss,
            "commitment": commitment,
            "total": total,
        }

    @staticmethod
    def freeze(parts: dict) -> dict:
        return {
            "idx": parts["idx"],
            "offset": parts["offset"],
            "z_e": parts["z_e"].detach().clone(),
            "z_q": parts["z_q"].detach().clone(),
        }

    def codebook_view(self) -> CodeBook:
        return CodeBook(self.codebook.detach().numpy().copy())


def _init_codebook_from_data(model: VQAutoencoder, x: torch.Tensor, seed: int) -> None:
    """Seed the codebook with encoder outputs of random training positions."""
    with torch.no_grad():
        z = model.encode(x).permute(0, 2, 3, 1).reshape(-1, model.codebook.shape[1])
        k = model.codebook.shape[0]
        rng = np.random.default_rng(seed)
        pick = rng.choice(z.shape[0], size=k, replace=z.shape[0] < k)
        jitter = torch.randn(k, z.shape[1], generator=seeded_generator(seed), dtype=DTYPE) * 1e-3
        model.codebook.copy_(z[torch.as_tensor(pick)] + jitter)


def train_vq_autoencoder(images, cfg: VqConfig, epochs: int, seed: int, adversary=None, pixel_mask=None):
    """Shared VQ autoencoder loop used by both VQVAE and VQGAN.

    ``adversary`` (optional) is called once per batch as
    ``adversary(x, parts, epoch) -> extra generator loss or None`` and owns
    its own parameters and randomness. ``pixel_mask`` (grid x grid booleans)
    restricts the reconstruction loss to mapped pixels.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    x_all = images_tensor(images)
    grid = x_all.shape[-1]
    s_model, s_batch, s_init = sub_seeds(seed, 3)
    model = VQAutoencoder(grid, cfg, s_model, pixel_mask)
    _init_codebook_from_data(model, x_all, s_init)
    opt = make_optimizer(model, "adam", cfg.learning_rate)
    rng = np.random.default_rng(s_batch)
    log = []
    usage = np.zeros(cfg.codebook_size, dtype=np.int64)
    for epoch in range(epochs):
        sums = {"recon_loss": 0.0, "codebook_loss": 0.0, "commitment": 0.0, "total": 0.0}
        n = 0
        usage[:] = 0
        extra = []
        for idx in batches(x_all.shape[0], cfg.batch_size, rng):
            x = x_all[torch.as_tensor(idx)]
            parts = model.forward_parts(x)
            loss = parts["total"]
            if adversary is not None:
                adv = adversary(x, parts, epoch)
                if adv is not None:
                    loss = loss + adv
                    extra.append(adv.item())
            check_loss(loss, epoch, "autoencoder loss")
            opt.zero_grad()
            loss.backward()
            opt.step()
            for key in sums:
                sums[key] += parts[key].item() * x.shape[0]
            n += x.shape[0]
            usage += np.bincount(parts["idx"].reshape(-1).numpy(), minlength=cfg.codebook_size)
        entry = {"epoch": epoch, **{k: v / n for k, v in sums.items()}}
        if extra:
            entry["adversarial"] = float(np.mean(extra))
        log.append(entry)
    warnings = []
    dead = float(np.mean(usage == 0))
    if dead > 0.9:
        warnings.append(f"dead codebook: {dead:.0%} of entries unused in the final epoch")
    return model, log, warnings, usage


def vqvae_train(
    images,
    epochs: int | None = None,
    codebook_K: int | None = None,
    seed: int = 0,
    config: VqConfig = VqConfig(),
    pixel_mask=None,
):
    if epochs is None:
        epochs = config.epochs
    if codebook_K is not None:
        if codebook_K < 2:
            raise ValueError("codebook needs K >= 2")
        config = VqConfig(**{**config.__dict__, "codebook_size": codebook_K})
    model, log, warns, usage = train_vq_autoencoder(images, config, epochs, seed, pixel_mask=pixel_mask)
    return TrainedGenerative("vqvae", {"autoencoder": model}, config, model.grid, seed, log, warns, {"usage": usage})


@torch.no_grad()
def encode_codes(model: TrainedGenerative, images) -> np.ndarray:
    ae = model.modules["autoencoder"]
    return ae.nearest(ae.encode(images_tensor(images))).numpy()


@torch.no_grad()
def reconstruct(model: TrainedGenerative, images) -> np.ndarray:
    ae = model.modules["autoencoder"]
    x = images_tensor(images)
    return ae.decode_codes(ae.nearest(ae.encode(x)))[:, 0].numpy()


def prior_train(model: TrainedGenerative, images, labels, epochs: int | None = None, seed: int = 0, **arch) -> PriorModel:
    """Fit the class-conditional masked-convolution prior on the model's codes."""
    if epochs is None:
        epochs = model.config.prior_epochs
    codes = encode_codes(model, images)
    arch.setdefault("learning_rate", model.config.prior_learning_rate)
    arch.setdefault("class_balanced", model.config.prior_class_balanced)
    return fit_code_prior(codes, labels, model.config.codebook_size, "pixelcnn", epochs, seed, **arch)


@torch.no_grad()
def decode_code_grids(model: TrainedGenerative, codes) -> np.ndarray:
    ae = model.modules["autoencoder"]
    return ae.decode_codes(torch.tensor(np.asarray(codes, dtype=np.int64)))[:, 0].numpy()


def vqvae_generate(model: TrainedGenerative, prior: PriorModel, y: int, count: int, seed: int = 0) -> np.ndarray:
    g = model.grid_size
    if count == 0:
        return np.zeros((0, g, g))
    images, n_clamped = clamp_unit(decode_code_grids(model, sample_codes(prior, y, count, seed)))
    if n_clamped:
        model.warnings.append(f"clamped {n_clamped} generated intensities")
    return images
