"""Small neural-network layer on top of torch (CPU, float64).

Networks are described by a :class:`NetworkSpec` (a list of plain layer
descriptors plus a seed) so they can be hashed, serialized and rebuilt
bit-identically. Autograd supplies the analytic gradients; :func:`grad_check`
compares them against central finite differences computed here.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
import torch.nn.functional as F

DTYPE = torch.float64


class ShapeMismatchError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


@dataclass(frozen=True)
class Dense:
    in_features: int
    out_features: int


@dataclass(frozen=True)
class Conv:
    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 1
    pad: int = 0


@dataclass(frozen=True)
class ConvTranspose:
    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 1
    pad: int = 0


@dataclass(frozen=True)
class MaskedConv:
    """Raster-causal convolution. Type "A" hides the centre tap, "B" keeps it."""

    in_ch: int
    out_ch: int
    kernel: int
    mask_type: str = "B"


@dataclass(frozen=True)
class Activation:
    kind: str


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Reshape:
    shape: tuple


LAYER_TYPES = {cls.__name__: cls for cls in (Dense, Conv, ConvTranspose, MaskedConv, Activation, Flatten, Reshape)}
ACTIVATIONS = ("relu", "leaky_relu", "sigmoid", "tanh")


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "layers": [{"type": type(l).__name__, **asdict(l)} for l in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        layers = []
        for item in d["layers"]:
            item = dict(item)
            kind = LAYER_TYPES[item.pop("type")]
            if kind is Reshape:
                item["shape"] = tuple(item["shape"])
            layers.append(kind(**item))
        return cls(tuple(layers), d.get("seed", 0))

    def digest(self) -> bytes:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).digest()


def conv_output_size(size: int, kernel: int, stride: int = 1, pad: int = 0) -> int:
    return (size + 2 * pad - kernel) // stride + 1


class MaskedConv2d(torch.nn.Conv2d):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, mask_type: str = "B"):
        if mask_type not in ("A", "B"):
            raise ValueError("mask_type must be 'A' or 'B'")
        super().__init__(in_ch, out_ch, kernel, padding=kernel // 2)
        mask = torch.ones(kernel, kernel, dtype=DTYPE)
        c = kernel // 2
        mask[c, c + (mask_type == "B") :] = 0.0
        mask[c + 1 :, :] = 0.0
        self.register_buffer("mask", mask[None, None].expand(out_ch, in_ch, kernel, kernel).clone())

    def forward(self, x):
        return F.conv2d(x, self.weight * self.mask, self.bias, padding=self.padding)


class _Reshape(torch.nn.Module):
    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(shape)

    def forward(self, x):
        return x.reshape(x.shape[0], *self.shape)


def _make_layer(desc) -> torch.nn.Module:
    if isinstance(desc, Dense):
        return torch.nn.Linear(desc.in_features, desc.out_features)
    if isinstance(desc, Conv):
        return torch.nn.Conv2d(desc.in_ch, desc.out_ch, desc.kernel, desc.stride, desc.pad)
    if isinstance(desc, ConvTranspose):
        return torch.nn.ConvTranspose2d(desc.in_ch, desc.out_ch, desc.kernel, desc.stride, desc.pad)
    if isinstance(desc, MaskedConv):
        return MaskedConv2d(desc.in_ch, desc.out_ch, desc.kernel, desc.mask_type)
    if isinstance(desc, Activation):
        return {
            "relu": torch.nn.ReLU,
            "leaky_relu": lambda: torch.nn.LeakyReLU(0.2),
            "sigmoid": torch.nn.Sigmoid,
            "tanh": torch.nn.Tanh,
        }[desc.kind]()
    if isinstance(desc, Flatten):
        return torch.nn.Flatten()
    if isinstance(desc, Reshape):
        return _Reshape(desc.shape)
    raise TypeError(f"unknown layer descriptor {desc!r}")


def he_uniform_(module: torch.nn.Module, generator: torch.Generator) -> None:
    """Seeded He-style uniform init, U(-b, b) with b = sqrt(6 / fan_in); zero biases."""
    for m in module.modules():
        if isinstance(m, (torch.nn.Linear, torch.nn.Conv2d, torch.nn.ConvTranspose2d)):
            w = m.weight
            if isinstance(m, torch.nn.Linear):
                fan_in = w.shape[1]
            elif isinstance(m, torch.nn.ConvTranspose2d):
                fan_in = w.shape[0] * w.shape[2] * w.shape[3]
            else:
                fan_in = w.shape[1] * w.shape[2] * w.shape[3]
            bound = math.sqrt(6.0 / fan_in)
            with torch.no_grad():
                w.copy_(torch.rand(w.shape, generator=generator, dtype=DTYPE) * 2 * bound - bound)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, torch.nn.Embedding):
            with torch.no_grad():
                m.weight.copy_(torch.randn(m.weight.shape, generator=generator, dtype=DTYPE))


def seeded_generator(seed: int) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(int(seed) & 0xFFFF_FFFF_FFFF_FFFF)
    return g


def _expects(desc, x: torch.Tensor) -> str | None:
    if isinstance(desc, Dense) and (x.ndim != 2 or x.shape[1] != desc.in_features):
        return f"expected (batch, {desc.in_features}), got {tuple(x.shape)}"
    if isinstance(desc, (Conv, ConvTranspose, MaskedConv)) and (x.ndim != 4 or x.shape[1] != desc.in_ch):
        return f"expected (batch, {desc.in_ch}, H, W), got {tuple(x.shape)}"
    if isinstance(desc, Reshape) and x[0].numel() != math.prod(desc.shape):
        return f"cannot reshape {tuple(x.shape[1:])} to {desc.shape}"
    return None


class Network(torch.nn.Module):
    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        self.layers = torch.nn.ModuleList(_make_layer(d) for d in spec.layers)
        self.to(DTYPE)
        he_uniform_(self, seeded_generator(spec.seed))

    def forward(self, x):
        for i, (desc, layer) in enumerate(zip(self.spec.layers, self.layers)):
            problem = _expects(desc, x)
            if problem:
                raise ShapeMismatchError(f"layer {i} ({type(desc).__name__}): {problem}")
            x = layer(x)
        return x


def build_network(spec: NetworkSpec) -> Network:
    return Network(spec)


def as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x.to(DTYPE)
    return torch.tensor(np.asarray(x, dtype=np.float64))


def check_finite(t: torch.Tensor, what: str) -> torch.Tensor:
    if not torch.isfinite(t).all():
        raise NonFiniteError(f"non-finite values in {what}")
    return t


def net_forward(net: torch.nn.Module, x) -> torch.Tensor:
    return check_finite(net(as_tensor(x)), "network output")


def loss_value(kind: str, output: torch.Tensor, target) -> torch.Tensor:
    if kind == "mse":
        return F.mse_loss(output, as_tensor(target))
    if kind == "bce":
        return F.binary_cross_entropy(output, as_tensor(target).reshape(output.shape))
    if kind == "ce":
        return F.cross_entropy(output, torch.tensor(np.asarray(target), dtype=torch.long))
    raise ValueError(f"unknown loss {kind!r}")


def make_optimizer(
    params,
    kind: str = "adam",
    learning_rate: float = 1e-3,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    momentum: float = 0.0,
) -> torch.optim.Optimizer:
    if isinstance(params, torch.nn.Module):
        params = params.parameters()
    params = list(params)
    if kind == "adam":
        return torch.optim.Adam(params, lr=learning_rate, betas=betas, eps=eps)
    if kind == "sgd":
        return torch.optim.SGD(params, lr=learning_rate, momentum=momentum)
    raise ValueError(f"unknown optimizer {kind!r}")


def train_step(net, loss: str, batch, optimizer, batch_index: int | None = None) -> float:
    """One optimizer step on the mean batch loss; returns the pre-update loss."""
    x, y = batch
    value = loss_value(loss, net(as_tensor(x)), y)
    if not torch.isfinite(value):
        raise NonFiniteError(f"non-finite loss at batch {batch_index}")
    optimizer.zero_grad()
    value.backward()
    optimizer.step()
    return value.item()


@dataclass
class GradCheckResult:
    max_rel_error: float
    n_checked: int
    degenerate: bool = False
    worst: tuple = field(default=())


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check_fn(
    loss_fn: Callable[[], torch.Tensor],
    params: Sequence[torch.Tensor],
    epsilon: float = 1e-5,
    max_entries: int = 10_000,
    n_entries: int | None = None,
    seed: int = 0,
    analytic_fn: Callable[[], torch.Tensor] | None = None,
    floor: float = 1e-6,
) -> GradCheckResult:
    """Compare autograd gradients of ``analytic_fn`` (default ``loss_fn``) to
    central differences of ``loss_fn`` over the entries of ``params``.

    All entries are checked when there are at most ``max_entries`` of them,
    otherwise a seeded random subset of that size. ``n_entries`` forces the
    subset size; zero gives an empty, degenerate comparison.
    """
    params = list(params)
    for p in params:
        if p.grad is not None:
            p.grad = None
    value = (analytic_fn or loss_fn)()
    grads = torch.autograd.grad(value, params, allow_unused=True)
    grads = [torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)]
    sizes = [p.numel() for p in params]
    total = sum(sizes)
    want = total if n_entries is None else n_entries
    want = min(want, max_entries, total)
    if want <= 0:
        return GradCheckResult(0.0, 0, True)
    rng = np.random.default_rng(seed)
    flat = np.arange(total) if want == total else np.sort(rng.choice(total, size=want, replace=False))
    offsets = np.cumsum([0] + sizes)
    worst, worst_at = 0.0, ()
    with torch.no_grad():
        for k in flat:
            pi = int(np.searchsorted(offsets, k, side="right") - 1)
            local = int(k - offsets[pi])
            view = params[pi].view(-1)
            orig = view[local].item()
            view[local] = orig + epsilon
            up = float(loss_fn())
            view[local] = orig - epsilon
            down = float(loss_fn())
            view[local] = orig
            numeric = (up - down) / (2 * epsilon)
            analytic = float(grads[pi].view(-1)[local])
            err = relative_error(analytic, numeric, floor)
            if err > worst:
                worst, worst_at = err, (pi, local, analytic, numeric)
    return GradCheckResult(worst, len(flat), False, worst_at)


def grad_check(net, loss: str, sample, epsilon: float = 1e-5, **kwargs) -> GradCheckResult:
    x, y = sample
    x = as_tensor(x)

    def fn():
        return loss_value(loss, net(x), y)

    return grad_check_fn(fn, [p for p in net.parameters()], epsilon, **kwargs)


CHECKPOINT_MAGIC = b"RIGACKPT"
CHECKPOINT_VERSION = 1


def flat_parameters(module: torch.nn.Module) -> np.ndarray:
    tensors = [t.detach().reshape(-1) for t in module.state_dict().values() if t.is_floating_point()]
    if not tensors:
        return np.zeros(0)
    return torch.cat(tensors).numpy().astype("<f8")


def load_flat_parameters(module: torch.nn.Module, flat: np.ndarray) -> None:
    state = module.state_dict()
    pos = 0
    with torch.no_grad():
        for t in state.values():
            if not t.is_floating_point():
                continue
            n = t.numel()
            t.copy_(torch.as_tensor(flat[pos : pos + n]).reshape(t.shape))
            pos += n
    if pos != flat.size:
        raise ValueError("parameter count mismatch")


def spec_digest(spec: dict) -> bytes:
    return hashlib.sha256(json.dumps(spec, sort_keys=True).encode()).digest()


def save_checkpoint(path, module: torch.nn.Module, spec: dict) -> None:
    """Write ``path`` (binary parameters) and ``path.json`` (the spec)."""
    path = Path(path)
    flat = flat_parameters(module)
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(spec_digest(spec))
        fh.write(struct.pack("<Q", flat.size))
        fh.write(flat.tobytes())
    Path(str(path) + ".json").write_text(json.dumps(spec, indent=2, sort_keys=True))


def read_checkpoint(path) -> tuple[dict, np.ndarray]:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ValueError("not a checkpoint file")
    (version,) = struct.unpack("<I", raw[8:12])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    digest = raw[12:44]
    (n,) = struct.unpack("<Q", raw[44:52])
    flat = np.frombuffer(raw[52 : 52 + 8 * n], dtype="<f8").copy()
    spec = json.loads(Path(str(path) + ".json").read_text())
    if spec_digest(spec) != digest:
        raise ValueError("checkpoint spec hash does not match sidecar")
    return spec, flat
