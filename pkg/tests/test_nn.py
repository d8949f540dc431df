import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st
from torch.nn.utils import parameters_to_vector, vector_to_parameters

from oracles import central_difference
from riga.nn import (
    Activation,
    Conv,
    ConvTranspose,
    Dense,
    Flatten,
    MaskedConv,
    NetworkSpec,
    NonFiniteError,
    Reshape,
    ShapeMismatchError,
    build_network,
    conv_output_size,
    flat_parameters,
    grad_check,
    grad_check_fn,
    load_flat_parameters,
    loss_value,
    make_optimizer,
    net_forward,
    read_checkpoint,
    save_checkpoint,
    train_step,
)


def numeric_grad_check(net, loss, x, y, eps=1e-6):
    """Autograd vs an independent numpy central difference over all parameters."""
    x = torch.tensor(np.asarray(x, dtype=np.float64))
    params = list(net.parameters())
    theta = parameters_to_vector(params).detach().numpy().copy()

    def f(vec):
        with torch.no_grad():
            vector_to_parameters(torch.tensor(vec), params)
            return loss_value(loss, net(x), y).item()

    numeric = central_difference(f, theta, eps)
    with torch.no_grad():
        vector_to_parameters(torch.tensor(theta), params)
    net.zero_grad()
    loss_value(loss, net(x), y).backward()
    analytic = torch.cat([p.grad.reshape(-1) for p in net.parameters()]).numpy()
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))


LAYER_NETS = {
    "dense": (NetworkSpec((Dense(4, 3), Activation("tanh"), Dense(3, 2)), 1), (2, 4), "mse"),
    "conv": (NetworkSpec((Conv(1, 2, 3, 2, 1), Activation("sigmoid"), Flatten(), Dense(8, 1)), 2), (2, 1, 4, 4), "mse"),
    "conv_transpose": (
        NetworkSpec((ConvTranspose(2, 1, 4, 2, 1), Activation("leaky_relu"), Flatten(), Dense(16, 1)), 3),
        (2, 2, 2, 2),
        "mse",
    ),
    "masked_conv": (NetworkSpec((MaskedConv(1, 2, 3, "A"), MaskedConv(2, 1, 3, "B"), Flatten()), 4), (2, 1, 3, 3), "mse"),
    "relu_reshape": (NetworkSpec((Dense(3, 8), Activation("relu"), Reshape((2, 2, 2)), Flatten(), Dense(8, 1)), 5), (3, 3), "mse"),
    "bce": (NetworkSpec((Dense(3, 4), Activation("tanh"), Dense(4, 1), Activation("sigmoid")), 6), (4, 3), "bce"),
    "ce": (NetworkSpec((Dense(3, 4), Activation("relu"), Dense(4, 3)), 7), (5, 3), "ce"),
}


def _target(name, out_shape, rng):
    if name == "bce":
        return rng.integers(0, 2, size=out_shape).astype(float)
    if name == "ce":
        return rng.integers(0, 3, size=out_shape[0])
    return rng.standard_normal(out_shape)


@pytest.mark.parametrize("name", sorted(LAYER_NETS))
def test_layer_gradients(name, rng):
    spec, shape, loss = LAYER_NETS[name]
    net = build_network(spec)
    with torch.no_grad():
        for p in net.parameters():
            p.add_(0.05 * torch.randn(p.shape, dtype=torch.float64, generator=torch.Generator().manual_seed(1)))
    x = rng.uniform(0.1, 0.9, size=shape)
    with torch.no_grad():
        out_shape = tuple(net(torch.tensor(x)).shape)
    y = _target(name, out_shape, rng)
    assert numeric_grad_check(net, loss, x, y) <= 1e-4
    assert grad_check(net, loss, (x, y)).max_rel_error <= 1e-4


def test_dense_sigmoid_bce_grad_check(rng):
    net = build_network(NetworkSpec((Dense(3, 2), Activation("sigmoid"), Dense(2, 1), Activation("sigmoid")), 0))
    res = grad_check(net, "bce", (rng.uniform(size=(4, 3)), [0, 1, 1, 0]), epsilon=1e-5)
    assert res.max_rel_error <= 1e-4 and res.n_checked == 11


def test_linear_mse_grad_check_tight(rng):
    net = build_network(NetworkSpec((Dense(3, 2),), 0))
    res = grad_check(net, "mse", (rng.standard_normal((4, 3)), rng.standard_normal((4, 2))), epsilon=1e-5)
    assert res.max_rel_error <= 1e-7


def test_grad_check_empty_subset():
    net = build_network(NetworkSpec((Dense(2, 1),), 0))
    res = grad_check(net, "mse", (np.ones((1, 2)), np.ones((1, 1))), n_entries=0)
    assert res.max_rel_error == 0.0 and res.degenerate and res.n_checked == 0


def test_grad_check_subsamples_large_nets():
    net = build_network(NetworkSpec((Dense(200, 60),), 0))
    res = grad_check(net, "mse", (np.ones((1, 200)), np.zeros((1, 60))), max_entries=300)
    assert res.n_checked == 300


def test_identity_dense():
    net = build_network(NetworkSpec((Dense(3, 3),), 0))
    with torch.no_grad():
        net.layers[0].weight.copy_(torch.eye(3, dtype=torch.float64))
        net.layers[0].bias.zero_()
    x = np.array([[0.3, -2.0, 5.0]])
    assert np.array_equal(net_forward(net, x).detach().numpy(), x)


def test_one_by_one_conv():
    net = build_network(NetworkSpec((Conv(1, 1, 1),), 0))
    with torch.no_grad():
        net.layers[0].weight.fill_(2.0)
        net.layers[0].bias.zero_()
    out = net_forward(net, np.full((1, 1, 4, 4), 0.5)).detach().numpy()
    assert (out == 1.0).all()


def test_forward_deterministic(rng):
    spec = NetworkSpec((Dense(5, 7), Activation("relu"), Dense(7, 4), Activation("tanh"), Dense(4, 1)), 42)
    x = rng.standard_normal((3, 5))
    a = net_forward(build_network(spec), x).detach().numpy()
    b = net_forward(build_network(spec), x).detach().numpy()
    assert np.array_equal(a, b)


def test_shape_mismatch_names_layer():
    net = build_network(NetworkSpec((Dense(4, 3), Activation("relu"), Dense(2, 1)), 0))
    with pytest.raises(ShapeMismatchError, match="layer 2"):
        net_forward(net, np.ones((1, 4)))


def test_memorize_single_sample(rng):
    net = build_network(NetworkSpec((Dense(4, 16), Activation("tanh"), Dense(16, 2)), 0))
    opt = make_optimizer(net, "adam", 1e-2)
    x, y = rng.standard_normal((1, 4)), rng.standard_normal((1, 2))
    for _ in range(500):
        train_step(net, "mse", (x, y), opt)
    assert loss_value("mse", net(torch.tensor(x)), y).item() < 1e-3


def test_zero_learning_rate_keeps_parameters(rng):
    net = build_network(NetworkSpec((Dense(3, 2),), 0))
    before = flat_parameters(net).copy()
    for kind in ("sgd", "adam"):
        opt = make_optimizer(net, kind, 0.0)
        train_step(net, "mse", (rng.standard_normal((2, 3)), rng.standard_normal((2, 2))), opt)
    assert np.array_equal(flat_parameters(net), before)


def test_train_step_returns_pre_update_loss(rng):
    net = build_network(NetworkSpec((Dense(3, 1),), 0))
    x, y = rng.standard_normal((4, 3)), rng.standard_normal((4, 1))
    expected = loss_value("mse", net(torch.tensor(x)), y).item()
    got = train_step(net, "mse", (x, y), make_optimizer(net, "sgd", 0.1))
    assert got == expected


def test_mse_perfect_prediction():
    net = build_network(NetworkSpec((Dense(2, 1),), 0))
    x = np.array([[1.0, 2.0]])
    y = net(torch.tensor(x)).detach().numpy()
    loss = loss_value("mse", net(torch.tensor(x)), y)
    loss.backward()
    assert loss.item() == 0.0
    assert all((p.grad == 0).all() for p in net.parameters())


def test_non_finite_loss_reports_batch():
    net = build_network(NetworkSpec((Dense(1, 1),), 0))
    with pytest.raises(NonFiniteError, match="batch 7"):
        train_step(net, "mse", (np.array([[np.inf]]), np.zeros((1, 1))), make_optimizer(net), batch_index=7)


@given(st.integers(1, 12), st.integers(1, 5), st.integers(1, 3), st.integers(0, 2))
def test_conv_output_size(size, kernel, stride, pad):
    if size + 2 * pad < kernel:
        return
    net = build_network(NetworkSpec((Conv(1, 1, kernel, stride, pad),), 0))
    out = net(torch.zeros(1, 1, size, size, dtype=torch.float64))
    expected = (size + 2 * pad - kernel) // stride + 1
    assert conv_output_size(size, kernel, stride, pad) == expected == out.shape[-1]


def _quadratic(x):
    return 0.5 * (x * torch.tensor([1.0, 4.0], dtype=torch.float64) * x).sum()


def test_sgd_without_momentum_is_plain_descent():
    x = torch.tensor([3.0, -2.0], dtype=torch.float64, requires_grad=True)
    opt = make_optimizer([x], "sgd", 0.1)
    ref = np.array([3.0, -2.0])
    for _ in range(5):
        opt.zero_grad()
        _quadratic(x).backward()
        opt.step()
        ref = ref - 0.1 * np.array([1.0, 4.0]) * ref
    np.testing.assert_allclose(x.detach().numpy(), ref, rtol=0, atol=1e-15)


def test_adam_zero_betas_is_rms_step():
    x = torch.tensor([3.0, -2.0], dtype=torch.float64, requires_grad=True)
    opt = make_optimizer([x], "adam", 0.1, betas=(0.0, 0.0), eps=1e-8)
    ref = np.array([3.0, -2.0])
    for _ in range(5):
        opt.zero_grad()
        _quadratic(x).backward()
        opt.step()
        g = np.array([1.0, 4.0]) * ref
        ref = ref - 0.1 * g / (np.sqrt(g * g) + 1e-8)
    np.testing.assert_allclose(x.detach().numpy(), ref, rtol=0, atol=1e-12)


@pytest.mark.parametrize("mask_type", ["A", "B"])
def test_masked_conv_is_causal(mask_type, rng):
    net = build_network(NetworkSpec((MaskedConv(1, 3, 3, mask_type), Activation("relu"), MaskedConv(3, 1, 3, "B")), 0))
    x = rng.uniform(size=(1, 1, 5, 5))
    base = net(torch.tensor(x)).detach().numpy()[0, 0]
    for r, c in [(2, 2), (0, 4), (4, 0)]:
        y = x.copy()
        y[0, 0, r, c] += 1.0
        out = net(torch.tensor(y)).detach().numpy()[0, 0]
        earlier = np.arange(25).reshape(5, 5) < r * 5 + c
        assert np.array_equal(out[earlier], base[earlier])
        if mask_type == "A":
            assert out[r, c] == base[r, c]


def test_checkpoint_round_trip(tmp_path):
    spec = NetworkSpec((Dense(3, 4), Activation("relu"), Dense(4, 1)), 9)
    net = build_network(spec)
    save_checkpoint(tmp_path / "m.ckpt", net, spec.to_dict())
    got_spec, flat = read_checkpoint(tmp_path / "m.ckpt")
    rebuilt = build_network(NetworkSpec.from_dict(got_spec))
    load_flat_parameters(rebuilt, flat)
    assert np.array_equal(flat_parameters(rebuilt), flat_parameters(net))
    assert (tmp_path / "m.ckpt").read_bytes()[:8] == b"RIGACKPT"


def test_checkpoint_rejects_edited_sidecar(tmp_path):
    spec = NetworkSpec((Dense(2, 1),), 0)
    save_checkpoint(tmp_path / "m.ckpt", build_network(spec), spec.to_dict())
    side = tmp_path / "m.ckpt.json"
    side.write_text(side.read_text().replace('"seed": 0', '"seed": 1'))
    with pytest.raises(ValueError, match="hash"):
        read_checkpoint(tmp_path / "m.ckpt")


def test_grad_check_fn_detects_wrong_gradient():
    w = torch.tensor([1.0, 2.0], dtype=torch.float64, requires_grad=True)
    res = grad_check_fn(lambda: (w**2).sum(), [w], analytic_fn=lambda: (w**3).sum())
    assert res.max_rel_error > 0.1
