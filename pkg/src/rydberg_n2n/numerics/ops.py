"""Differentiable operations over :class:`Tensor`.

Shapes follow a channels-last convention for sequence data:
``(..., length, channels)``.  Elementwise binary ops accept numpy-style
broadcasting of a bias or constant; gradients are summed back to the
original operand shape.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from ..errors import ConfigurationError, DimensionError, LengthError
from .tensor import Tensor, as_tensor, make_node

_SQRT_HALF = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _lift(a, like: Tensor | None = None) -> Tensor:
    if isinstance(a, Tensor):
        return a
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(a, dtype=dtype))


# -- elementwise arithmetic ---------------------------------------------------

def add(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    out = a.data + b.data

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_node(out, (a, b), backward_fn, "add")


def sub(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    out = a.data - b.data

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_node(out, (a, b), backward_fn, "sub")


def mul(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    out = a.data * b.data

    def backward_fn(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return make_node(out, (a, b), backward_fn, "mul")


def power(a: Tensor, exponent: float) -> Tensor:
    out = a.data**exponent

    def backward_fn(g):
        return (g * exponent * a.data ** (exponent - 1),)

    return make_node(out, (a,), backward_fn, "pow")


# -- reductions and shape manipulation ---------------------------------------

def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def backward_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_node(np.asarray(out), (a,), backward_fn, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.data.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.shape[i] for i in axes]))
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)

    def backward_fn(g):
        return (g.reshape(a.shape),)

    return make_node(out, (a,), backward_fn, "reshape")


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = np.transpose(a.data, axes)

    def backward_fn(g):
        return (np.transpose(g, inverse),)

    return make_node(out, (a,), backward_fn, "transpose")


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward_fn(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_node(out, tensors, backward_fn, "concat")


# -- linear algebra -------------------------------------------------------------

def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes, with leading batch axes.

    ``b`` may be a plain 2-D weight shared across the batch of ``a``.
    """
    a = _lift(a)
    b = _lift(b, a)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs at least 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def backward_fn(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            if b.ndim == 2:
                k = a.shape[-1]
                gb = a.data.reshape(-1, k).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return make_node(out, (a, b), backward_fn, "matmul")


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    y = matmul(x, weight)
    return add(y, bias) if bias is not None else y


# -- convolution-family ops ---------------------------------------------------

def conv1d(x: Tensor, kernels: Tensor, bias: Tensor | None = None) -> Tensor:
    """'Same' zero-padded cross-correlation.

    x: (..., L, C_in); kernels: (K, C_in, C_out); bias: (C_out,).
    """
    x = as_tensor(x)
    kernels = as_tensor(kernels)
    bias = None if bias is None else as_tensor(bias)
    if kernels.ndim != 3:
        raise DimensionError(f"kernels must be (K, C_in, C_out), got {kernels.shape}")
    K, c_in, c_out = kernels.shape
    if K % 2 == 0:
        raise ConfigurationError(f"conv1d kernel size must be odd, got {K}")
    if x.shape[-1] != c_in:
        raise DimensionError(f"conv1d input has {x.shape[-1]} channels, kernels expect {c_in}")
    L = x.shape[-2]
    pad = K // 2
    lead = x.shape[:-2]
    widths = [(0, 0)] * len(lead) + [(pad, pad), (0, 0)]
    xp = np.pad(x.data, widths)
    # (..., L, C_in, K) -> (..., L, K, C_in) -> (..., L, K*C_in)
    cols = np.swapaxes(sliding_window_view(xp, K, axis=-2), -1, -2).reshape(*lead, L, K * c_in)
    w2 = kernels.data.reshape(K * c_in, c_out)
    out = cols @ w2
    if bias is not None:
        out = out + bias.data
    parents = (x, kernels) if bias is None else (x, kernels, bias)

    def backward_fn(g):
        gx = gw = gb = None
        if kernels.requires_grad:
            gw = (cols.reshape(-1, K * c_in).T @ g.reshape(-1, c_out)).reshape(K, c_in, c_out)
        if x.requires_grad:
            gcols = (g @ w2.T).reshape(*lead, L, K, c_in)
            gxp = np.zeros(xp.shape, dtype=g.dtype)
            for k in range(K):
                gxp[..., k : k + L, :] += gcols[..., :, k, :]
            gx = gxp[..., pad : pad + L, :]
        if bias is not None and bias.requires_grad:
            gb = g.reshape(-1, c_out).sum(axis=0)
        return (gx, gw) if bias is None else (gx, gw, gb)

    return make_node(out, parents, backward_fn, "conv1d")


def maxpool1d(x: Tensor, pool: int = 2) -> Tensor:
    """Non-overlapping max over pairs along the length axis; ties go to the first."""
    L, C = x.shape[-2], x.shape[-1]
    if L % pool:
        raise LengthError(f"maxpool1d needs length divisible by {pool}, got {L}")
    lead = x.shape[:-2]
    grouped = x.data.reshape(*lead, L // pool, pool, C)
    idx = np.argmax(grouped, axis=-2)
    out = np.take_along_axis(grouped, idx[..., None, :], axis=-2)[..., 0, :]

    def backward_fn(g):
        mask = np.arange(pool).reshape(pool, 1) == idx[..., None, :]
        return ((mask * g[..., None, :]).reshape(x.shape),)

    return make_node(out, (x,), backward_fn, "maxpool1d")


def upsample1d(x: Tensor, factor: int = 2) -> Tensor:
    """Nearest-neighbour repetition along the length axis."""
    out = np.repeat(x.data, factor, axis=-2)
    L, C = x.shape[-2], x.shape[-1]

    def backward_fn(g):
        return (g.reshape(*x.shape[:-2], L, factor, C).sum(axis=-2),)

    return make_node(out, (x,), backward_fn, "upsample1d")


# -- nonlinearities -------------------------------------------------------------

def softmax(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=-1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=-1, keepdims=True)
    y = z

    def backward_fn(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return make_node(y, (x,), backward_fn, "softmax")


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, 0.5 x (1 + erf(x / sqrt 2))."""
    cdf = 0.5 * (1.0 + erf(x.data * _SQRT_HALF))
    out = x.data * cdf

    def backward_fn(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return (g * (cdf + x.data * pdf),)

    return make_node(out, (x,), backward_fn, "gelu")


def leaky_relu(x: Tensor, slope: float = 0.3) -> Tensor:
    if not 0.0 < slope < 1.0:
        raise ConfigurationError(f"leaky_relu slope must lie in (0, 1), got {slope}")
    positive = x.data >= 0
    out = np.where(positive, x.data, slope * x.data)

    def backward_fn(g):
        return (np.where(positive, g, slope * g),)

    return make_node(out, (x,), backward_fn, "leaky_relu")


def dropout(x: Tensor, rate: float = 0.1, training: bool = False, seed=None) -> Tensor:
    """Inverted dropout.  Identity unless ``training``.

    ``seed`` may be an integer or a ``numpy.random.Generator``.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    keep = rng.random(x.shape) >= rate
    scale = np.asarray(1.0 / (1.0 - rate), dtype=x.dtype)
    mask = keep * scale

    def backward_fn(g):
        return (g * mask,)

    return make_node(x.data * mask, (x,), backward_fn, "dropout")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data
    n = x.shape[-1]

    def backward_fn(g):
        gx = ggamma = gbeta = None
        if gamma.requires_grad:
            ggamma = (g * xhat).reshape(-1, n).sum(axis=0)
        if beta.requires_grad:
            gbeta = g.reshape(-1, n).sum(axis=0)
        if x.requires_grad:
            gh = g * gamma.data
            gx = inv * (
                gh - gh.mean(axis=-1, keepdims=True) - xhat * (gh * xhat).mean(axis=-1, keepdims=True)
            )
        return gx, ggamma, gbeta

    return make_node(out, (x, gamma, beta), backward_fn, "layer_norm")


def attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """softmax(q k^T) v over (..., L, d) operands, one (L, L) block at a time.

    Equal to ``matmul(softmax(matmul(q, k^T)), v)`` but never holds more
    than one score block: the forward keeps per-row log-normalisers and
    the backward recomputes each block.  The caller applies any
    1/sqrt(d) scaling to ``q``.
    """
    lead = q.shape[:-2]
    L, d = q.shape[-2], q.shape[-1]
    qs = q.data.reshape(-1, L, d)
    ks = k.data.reshape(-1, k.shape[-2], d)
    vs = v.data.reshape(-1, k.shape[-2], v.shape[-1])
    n_blocks, Lk = qs.shape[0], ks.shape[1]
    out = np.empty((n_blocks, L, vs.shape[-1]), dtype=q.dtype)
    lse = np.empty((n_blocks, L, 1), dtype=q.dtype)
    s = np.empty((L, Lk), dtype=q.dtype)
    for i in range(n_blocks):
        np.matmul(qs[i], ks[i].T, out=s)
        m = s.max(axis=-1, keepdims=True)
        s -= m
        np.exp(s, out=s)
        z = s.sum(axis=-1, keepdims=True)
        s /= z
        np.matmul(s, vs[i], out=out[i])
        lse[i] = m + np.log(z)

    def backward_fn(g):
        gs = g.reshape(out.shape)
        rowdot = (gs * out).sum(axis=-1, keepdims=True)
        gq, gk, gv = np.empty_like(qs), np.empty_like(ks), np.empty_like(vs)
        p = np.empty((L, Lk), dtype=q.dtype)
        dp = np.empty((L, Lk), dtype=q.dtype)
        for i in range(n_blocks):
            np.matmul(qs[i], ks[i].T, out=p)
            p -= lse[i]
            np.exp(p, out=p)
            np.matmul(p.T, gs[i], out=gv[i])
            np.matmul(gs[i], vs[i].T, out=dp)
            dp -= rowdot[i]
            dp *= p
            np.matmul(dp, ks[i], out=gq[i])
            np.matmul(dp.T, qs[i], out=gk[i])
        return gq.reshape(q.shape), gk.reshape(k.shape), gv.reshape(v.shape)

    return make_node(out.reshape(*lead, L, vs.shape[-1]), (q, k, v), backward_fn, "attention")


# -- loss -------------------------------------------------------------------------

def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean of squared differences over every element."""
    target = _lift(target, pred)
    if pred.shape != target.shape:
        raise DimensionError(f"mse_loss shapes differ: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    n = diff.size
    out = np.asarray(np.mean(diff * diff))

    def backward_fn(g):
        base = (2.0 / n) * diff * g
        return (base if pred.requires_grad else None, -base if target.requires_grad else None)

    return make_node(out, (pred, target), backward_fn, "mse_loss")
