"""Finite-difference gradient cases shared by the unit tests and the acceptance gate."""

from __future__ import annotations

import numpy as np
from gradcheck import numeric_grad, rel_error

from rydberg_n2n import numerics as nx
from rydberg_n2n.models import TransformerConfig, UNetConfig, forward, init_params
from rydberg_n2n.numerics import Tensor

N_CASES = 20


def _shape_ops(a, b):
    c = nx.concat([a, b], axis=-1).transpose(1, 0, 2).reshape(2, -1)
    return nx.mean(c * c, axis=1) + nx.sum(c**3.0)


def _build(name: str, seed: int):
    r = np.random.default_rng(seed)
    n = r.standard_normal
    if name == "matmul":
        return nx.matmul, [n((3, 4)), n((4, 2))]
    if name == "matmul_batched":
        return nx.matmul, [n((2, 3, 4)), n((4, 5))]
    if name == "add_sub_mul_broadcast":
        return (lambda a, c: (a + c) * (a - c)), [n((2, 3, 4)), n(4)]
    if name == "divide_scalar":
        c = float(r.uniform(0.5, 2.0))
        return (lambda a: a / c), [n((3, 4))]
    if name == "dense":
        return nx.dense, [n((2, 5, 3)), n((3, 4)), n(4)]
    if name == "conv1d":
        k = [1, 3, 5][seed % 3]
        return nx.conv1d, [n((2, 7, 3)), n((k, 3, 4)), n(4)]
    if name == "maxpool1d":
        return nx.maxpool1d, [n((2, 8, 3))]
    if name == "upsample1d":
        return nx.upsample1d, [n((2, 5, 3))]
    if name == "softmax":
        return nx.softmax, [n((3, 6)) * 3]
    if name == "gelu":
        return nx.gelu, [n((4, 5)) * 2]
    if name == "leaky_relu":
        return (lambda x: nx.leaky_relu(x, 0.3)), [n((4, 5))]
    if name == "dropout":
        return (lambda x: nx.dropout(x, 0.3, True, seed)), [n((4, 5))]
    if name == "layer_norm":
        return nx.layer_norm, [n((3, 6)), n(6), n(6)]
    if name == "attention":
        return nx.attention, [n((2, 2, 5, 3)) for _ in range(3)]
    if name == "mse_loss":
        return nx.mse_loss, [n((3, 4)), n((3, 4))]
    if name == "shape_ops":
        return _shape_ops, [n((2, 3, 2)), n((2, 3, 1))]
    raise KeyError(name)


OPS = [
    "matmul", "matmul_batched", "add_sub_mul_broadcast", "divide_scalar", "dense", "conv1d", "maxpool1d",
    "upsample1d", "softmax", "gelu", "leaky_relu", "dropout", "layer_norm", "attention", "mse_loss",
    "shape_ops",
]


def op_error(name: str, seed: int) -> float:
    """Relative error of autodiff vs central differences for one seeded case."""
    fn, arrays = _build(name, seed)
    probe = np.random.default_rng(10_000 + seed).standard_normal(fn(*[Tensor(a) for a in arrays]).shape)

    def scalar(*arrs):
        return float(np.sum(fn(*[Tensor(a) for a in arrs]).data * probe))

    leaves = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    grads = nx.backward(nx.sum(fn(*leaves) * probe), leaves)
    numeric = numeric_grad(scalar, [a.copy() for a in arrays])
    return max(rel_error(grads[leaf], num) for leaf, num in zip(leaves, numeric))


TINY_TRANSFORMER = TransformerConfig(seq_len=8, d_model=8, n_heads=2, ffn_dim=12, n_layers=2)
TINY_UNET = UNetConfig(seq_len=8, enc1_channels=3, enc2_channels=4, final_channels=5)


def model_error(cfg, mode: str, n_coords: int | None = None, seed: int = 0) -> float:
    """End-to-end MSE-loss gradient check over every parameter tensor.

    ``n_coords`` samples that many coordinates per tensor; ``None`` checks all.
    Exactly-zero gradients (the key bias under softmax shift invariance) are
    compared with an absolute floor.
    """
    rng = np.random.default_rng(seed)
    params = init_params(cfg, seed)
    for k, v in params.arrays.items():
        params.arrays[k] = v + 0.1 * rng.standard_normal(v.shape)
    x = rng.standard_normal((2, cfg.seq_len, 1))
    y = rng.standard_normal((2, cfg.seq_len, 1))
    weights = params.tensors(requires_grad=True)
    grads = nx.backward(nx.mse_loss(forward(x, params, mode, 7, weights), y), weights.values())

    def loss_at():
        return float(nx.mse_loss(forward(x, params, mode, 7), y).data)

    worst = 0.0
    for name, t in weights.items():
        flat = params.arrays[name].reshape(-1)
        if n_coords is None:
            coords = np.arange(flat.size)
        else:
            coords = rng.choice(flat.size, min(n_coords, flat.size), replace=False)
        num = np.empty(len(coords))
        for j, i in enumerate(coords):
            old = flat[i]
            flat[i] = old + 1e-6
            up = loss_at()
            flat[i] = old - 1e-6
            down = loss_at()
            flat[i] = old
            num[j] = (up - down) / 2e-6
        worst = max(worst, rel_error(grads[t].reshape(-1)[coords], num, floor=1e-3))
    return worst
