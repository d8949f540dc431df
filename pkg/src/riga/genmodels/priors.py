"""Class-conditional autoregressive priors over discrete code grids.

Two flavours share one sampling loop: a masked-convolution prior working on
the 2-D grid, and a small causal self-attention prior over the raster
sequence. Both produce logits of shape (B, K, h, w) for teacher-forced
input codes, where the logits at a position only depend on codes that
come earlier in raster order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..nn import DTYPE, MaskedConv2d, he_uniform_, make_optimizer, seeded_generator
from .base import batches, check_loss, sub_seeds


class PixelCnnPrior(torch.nn.Module):
    """Masked-conv prior with location-dependent label conditioning.

    A convolution hardly knows where it is on the grid, yet the class
    difference is usually specific to each position (each pixel is a
    different feature). So the label selects a learned (channels, h, w)
    map per layer instead of a single per-channel bias. Without
    ``code_shape`` the map is constant over positions.
    """

    def __init__(
        self,
        K: int,
        channels: int = 64,
        layers: int = 3,
        kernel: int = 3,
        seed: int = 0,
        code_shape: tuple | None = None,
    ):
        super().__init__()
        self.K = K
        h, w = code_shape if code_shape is not None else (1, 1)
        self.code_embed = torch.nn.Embedding(K, channels)
        convs = [MaskedConv2d(channels, channels, kernel, "A")]
        convs += [MaskedConv2d(channels, channels, kernel, "B") for _ in range(layers - 1)]
        self.convs = torch.nn.ModuleList(convs)
        self.out = torch.nn.Conv2d(channels, K, 1)
        self.to(DTYPE)
        gen = seeded_generator(seed)
        he_uniform_(self, gen)
        self.label_maps = torch.nn.Parameter(torch.randn(layers, 2, channels, h, w, generator=gen, dtype=DTYPE) * 0.01)
        with torch.no_grad():
            self.code_embed.weight.mul_(0.1)

    def forward(self, codes: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        h = self.code_embed(codes).permute(0, 3, 1, 2)
        # the label is added after every layer, starting with the type A one,
        # so the very first position can see it too; it depends on no code,
        # so causality is untouched
        for i, conv in enumerate(self.convs):
            h = F.relu(conv(h) + self.label_maps[i, labels])
        return self.out(h)


class CausalSelfAttention(torch.nn.Module):
    def __init__(self, width: int, heads: int):
        super().__init__()
        if width % heads:
            raise ValueError("width must be divisible by heads")
        self.heads = heads
        self.qkv = torch.nn.Linear(width, 3 * width)
        self.proj = torch.nn.Linear(width, width)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, t, w = x.shape
        q, k, v = self.qkv(x).split(w, dim=2)
        dh = w // self.heads
        q, k, v = (m.reshape(b, t, self.heads, dh).transpose(1, 2) for m in (q, k, v))
        att = q @ k.transpose(-1, -2) / math.sqrt(dh)
        future = torch.triu(torch.ones(t, t, dtype=torch.bool), diagonal=1)
        att = att.masked_fill(future, float("-inf")).softmax(dim=-1)
        out = (att @ v).transpose(1, 2).reshape(b, t, w)
        return self.proj(out)

    def step(self, x: torch.Tensor, cache: list) -> torch.Tensor:
        """One new position (B, 1, W) attending to itself and ``cache``."""
        b, _, w = x.shape
        q, k, v = self.qkv(x).split(w, dim=2)
        dh = w // self.heads
        q, k, v = (m.reshape(b, 1, self.heads, dh).transpose(1, 2) for m in (q, k, v))
        if cache:
            k = torch.cat([cache[0], k], dim=2)
            v = torch.cat([cache[1], v], dim=2)
        cache[:] = [k, v]
        att = (q @ k.transpose(-1, -2) / math.sqrt(dh)).softmax(dim=-1)
        return self.proj((att @ v).transpose(1, 2).reshape(b, 1, w))


class _Block(torch.nn.Module):
    def __init__(self, width: int, heads: int):
        super().__init__()
        self.norm1 = torch.nn.LayerNorm(width)
        self.attn = CausalSelfAttention(width, heads)
        self.norm2 = torch.nn.LayerNorm(width)
        self.mlp = torch.nn.Sequential(torch.nn.Linear(width, 4 * width), torch.nn.ReLU(), torch.nn.Linear(4 * width, width))

    def forward(self, x):
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))

    def step(self, x, cache: list):
        x = x + self.attn.step(self.norm1(x), cache)
        return x + self.mlp(self.norm2(x))


class TransformerPrior(torch.nn.Module):
    """Causal attention over the raster sequence; the label is the start token."""

    def __init__(self, K: int, seq_len: int, width: int = 64, heads: int = 4, layers: int = 2, seed: int = 0):
        super().__init__()
        self.K = K
        self.tokens = torch.nn.Embedding(K, width)
        self.start = torch.nn.Embedding(2, width)
        self.position = torch.nn.Parameter(torch.zeros(seq_len, width, dtype=DTYPE))
        self.blocks = torch.nn.ModuleList(_Block(width, heads) for _ in range(layers))
        self.norm = torch.nn.LayerNorm(width)
        self.head = torch.nn.Linear(width, K)
        self.to(DTYPE)
        gen = seeded_generator(seed)
        he_uniform_(self, gen)
        with torch.no_grad():
            self.tokens.weight.mul_(0.1)
            self.start.weight.mul_(0.1)
            self.position.copy_(torch.randn(seq_len, width, generator=gen, dtype=DTYPE) * 0.02)

    def forward(self, codes: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        b, h, w = codes.shape
        seq = codes.reshape(b, h * w)
        x = torch.cat([self.start(labels)[:, None], self.tokens(seq[:, :-1])], dim=1)
        x = x + self.position[: h * w]
        for block in self.blocks:
            x = block(x)
        logits = self.head(self.norm(x))
        return logits.transpose(1, 2).reshape(b, self.K, h, w)

    def sample(self, labels: torch.Tensor, h: int, w: int, gen: torch.Generator) -> torch.Tensor:
        """Ancestral sampling with cached keys and values; same distribution
        as stepping :meth:`forward` one position at a time."""
        b = labels.shape[0]
        caches = [[] for _ in self.blocks]
        out = torch.zeros(b, h * w, dtype=torch.long)
        x = self.start(labels)[:, None]
        for t in range(h * w):
            x = x + self.position[t]
            for block, cache in zip(self.blocks, caches):
                x = block.step(x, cache)
            probs = F.softmax(self.head(self.norm(x))[:, 0], dim=1)
            out[:, t] = torch.multinomial(probs, 1, generator=gen)[:, 0]
            x = self.tokens(out[:, t : t + 1])
        return out.reshape(b, h, w)


@dataclass
class PriorModel:
    kind: str
    network: torch.nn.Module
    code_shape: tuple
    K: int
    log: list
    seed: int


def fit_code_prior(
    codes,
    labels,
    K: int,
    kind: str = "pixelcnn",
    epochs: int = 50,
    seed: int = 0,
    batch_size: int = 64,
    learning_rate: float = 1e-3,
    class_balanced: bool = False,
    **arch,
) -> PriorModel:
    """Train a class-conditional prior on integer code grids by cross-entropy.

    With ``class_balanced`` each grid's loss is weighted by the inverse
    frequency of its label, so a rare class shapes its conditional as much
    as the common one does.
    """
    codes_t = torch.tensor(np.asarray(codes, dtype=np.int64))
    labels_t = torch.tensor(np.asarray(labels, dtype=np.int64).reshape(-1))
    freq = torch.bincount(labels_t, minlength=2).to(DTYPE)
    weight_of = (freq.sum() / (2 * freq.clamp(min=1))) if class_balanced else torch.ones(2, dtype=DTYPE)
    n, h, w = codes_t.shape
    s_init, s_batch = sub_seeds(seed, 2)
    if kind == "pixelcnn":
        net = PixelCnnPrior(K, seed=s_init % 2**31, code_shape=(h, w), **arch)
    elif kind == "transformer":
        net = TransformerPrior(K, h * w, seed=s_init % 2**31, **arch)
    else:
        raise ValueError(f"unknown prior kind {kind!r}")
    opt = make_optimizer(net, "adam", learning_rate)
    rng = np.random.default_rng(s_batch)
    log = []
    for epoch in range(epochs):
        total, count = 0.0, 0
        for idx in batches(n, batch_size, rng):
            idx = torch.as_tensor(idx)
            c, y = codes_t[idx], labels_t[idx]
            per_grid = F.cross_entropy(net(c, y), c, reduction="none").mean(dim=(1, 2))
            wts = weight_of[y]
            loss = (per_grid * wts).sum() / wts.sum()
            check_loss(loss, epoch, "prior loss")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * c.shape[0]
            count += c.shape[0]
        log.append({"epoch": epoch, "nll": total / count})
    return PriorModel(kind, net, (h, w), K, log, seed)


@torch.no_grad()
def code_log_likelihood(prior: PriorModel, codes, labels) -> np.ndarray:
    """Log-probability (nats) of each full code grid."""
    c = torch.tensor(np.asarray(codes, dtype=np.int64))
    y = torch.tensor(np.asarray(labels, dtype=np.int64).reshape(-1))
    logp = F.log_softmax(prior.network(c, y), dim=1)
    picked = logp.gather(1, c[:, None]).squeeze(1)
    return picked.sum(dim=(1, 2)).numpy()


@torch.no_grad()
def position_entropies(prior: PriorModel, codes, labels) -> np.ndarray:
    """Mean predictive entropy per position (nats) under teacher forcing."""
    c = torch.tensor(np.asarray(codes, dtype=np.int64))
    y = torch.tensor(np.asarray(labels, dtype=np.int64).reshape(-1))
    logp = F.log_softmax(prior.network(c, y), dim=1)
    ent = -(logp.exp() * logp).sum(dim=1)
    return ent.mean(dim=0).numpy()


@torch.no_grad()
def sample_codes(prior: PriorModel, y: int, count: int, seed: int) -> np.ndarray:
    """Ancestral sampling in raster order."""
    h, w = prior.code_shape
    gen = seeded_generator(seed)
    codes = torch.zeros(count, h, w, dtype=torch.long)
    labels = torch.full((count,), int(y), dtype=torch.long)
    if count == 0:
        return codes.numpy()
    if hasattr(prior.network, "sample"):
        return prior.network.sample(labels, h, w, gen).numpy()
    for r in range(h):
        for c in range(w):
            probs = F.softmax(prior.network(codes, labels)[:, :, r, c], dim=1)
            codes[:, r, c] = torch.multinomial(probs, 1, generator=gen)[:, 0]
    return codes.numpy()


def uniform_codes(K: int, code_shape, count: int, seed: int) -> np.ndarray:
    gen = seeded_generator(seed)
    return torch.randint(0, K, (count, *code_shape), generator=gen).numpy()
