"""Transformer-encoder denoiser over a single-channel trace."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .. import numerics as nx
from ..errors import ConfigurationError, DimensionError
from ..numerics import Tensor
from .config import TransformerConfig
from .params import ModelParams


@lru_cache(maxsize=16)
def _sine_table(seq_len: int, d_model: int) -> np.ndarray:
    pos = np.arange(seq_len, dtype=np.float64)[:, None]
    i = np.arange(d_model // 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * i / d_model)
    table = np.empty((seq_len, d_model))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    table.flags.writeable = False
    return table


def sine_positional_encoding(seq_len: int, d_model: int) -> np.ndarray:
    """PE[p, 2i] = sin(p / 10000^(2i/d)), PE[p, 2i+1] = cos of the same angle."""
    if d_model % 2:
        raise ConfigurationError(f"d_model must be even, got {d_model}")
    return _sine_table(seq_len, d_model).copy()


def _as_batch(trace) -> tuple[Tensor, bool]:
    x = nx.as_tensor(trace)
    if x.ndim == 1:
        x = x.reshape(1, x.shape[0], 1)
        return x, True
    if x.ndim == 2:
        return x.reshape(1, *x.shape), True
    return x, False


def _weights(params: ModelParams, weights, dtype) -> dict[str, Tensor]:
    if weights is not None:
        return weights
    return {k: Tensor(v.astype(dtype, copy=False)) for k, v in params.arrays.items()}


def _self_attention(h: Tensor, w: dict[str, Tensor], prefix: str, n_heads: int) -> Tensor:
    B, L, d = h.shape
    dh = d // n_heads

    def heads(t: Tensor) -> Tensor:
        return t.reshape(B, L, n_heads, dh).transpose(0, 2, 1, 3)

    q = nx.dense(h, w[f"{prefix}.query.weight"], w[f"{prefix}.query.bias"])
    k = nx.dense(h, w[f"{prefix}.key.weight"], w[f"{prefix}.key.bias"])
    v = nx.dense(h, w[f"{prefix}.value.weight"], w[f"{prefix}.value.bias"])
    q = heads(q) * (1.0 / math.sqrt(dh))
    ctx = nx.attention(q, heads(k), heads(v)).transpose(0, 2, 1, 3).reshape(B, L, d)
    return nx.dense(ctx, w[f"{prefix}.output.weight"], w[f"{prefix}.output.bias"])


def transformer_forward(
    trace,
    params: ModelParams,
    mode: str = "infer",
    seed=None,
    weights: dict[str, Tensor] | None = None,
) -> Tensor:
    """Map a (L, 1) or (B, L, 1) standardized trace to a denoised trace of the same shape.

    ``weights`` lets the training loop pass leaf tensors that track
    gradients; otherwise the arrays in ``params`` are used as constants.
    """
    cfg: TransformerConfig = params.config
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    x, squeeze = _as_batch(trace)
    if x.shape[-2] != cfg.seq_len or x.shape[-1] != cfg.input_channels:
        raise DimensionError(
            f"trace shape {x.shape[1:]} does not match model ({cfg.seq_len}, {cfg.input_channels})"
        )
    training = mode == "train"
    rng = np.random.default_rng(seed) if training else None
    w = _weights(params, weights, x.dtype)

    h = nx.dense(x, w["input_projection.weight"], w["input_projection.bias"])
    if cfg.use_positional_encoding:
        h = h + _sine_table(cfg.seq_len, cfg.d_model).astype(x.dtype)
    for i in range(cfg.n_layers):
        p = f"layer{i}"
        a = _self_attention(h, w, f"{p}.attention", cfg.n_heads)
        h = h + nx.dropout(a, cfg.dropout_rate, training, rng)
        if cfg.use_layer_norm:
            h = nx.layer_norm(h, w[f"{p}.norm1.gamma"], w[f"{p}.norm1.beta"])
        f = nx.gelu(nx.dense(h, w[f"{p}.ffn.hidden.weight"], w[f"{p}.ffn.hidden.bias"]))
        f = nx.dense(f, w[f"{p}.ffn.output.weight"], w[f"{p}.ffn.output.bias"])
        h = h + nx.dropout(f, cfg.dropout_rate, training, rng)
        if cfg.use_layer_norm:
            h = nx.layer_norm(h, w[f"{p}.norm2.gamma"], w[f"{p}.norm2.beta"])
    out = nx.dense(h, w["output_projection.weight"], w["output_projection.bias"])
    if squeeze:
        out = out.reshape(out.shape[1:])
    return out
