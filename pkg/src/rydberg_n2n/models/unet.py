"""Two-scale 1D U-Net denoiser."""

from __future__ import annotations

from .. import numerics as nx
from ..errors import DimensionError, LengthError
from ..numerics import Tensor
from .config import UNetConfig
from .params import ModelParams
from .transformer import _as_batch, _weights


def unet_forward(
    trace,
    params: ModelParams,
    mode: str = "infer",
    seed=None,
    weights: dict[str, Tensor] | None = None,
) -> Tensor:
    """conv+LeakyReLU -> pool -> conv+LeakyReLU -> upsample -> concat skip -> conv+LeakyReLU -> 1x1 head.

    ``mode`` and ``seed`` are accepted for interface parity with the
    Transformer; the U-Net has no stochastic layers.
    """
    cfg: UNetConfig = params.config
    x, squeeze = _as_batch(trace)
    L = x.shape[-2]
    if L % 2:
        raise LengthError(f"U-Net needs an even trace length, got {L}")
    if L != cfg.seq_len or x.shape[-1] != cfg.input_channels:
        raise DimensionError(
            f"trace shape {x.shape[1:]} does not match model ({cfg.seq_len}, {cfg.input_channels})"
        )
    w = _weights(params, weights, x.dtype)
    slope = cfg.leaky_slope

    skip = nx.leaky_relu(nx.conv1d(x, w["enc1.kernel"], w["enc1.bias"]), slope)
    h = nx.maxpool1d(skip, cfg.pool)
    h = nx.leaky_relu(nx.conv1d(h, w["enc2.kernel"], w["enc2.bias"]), slope)
    h = nx.upsample1d(h, cfg.upsample)
    h = nx.concat([skip, h], axis=-1)
    h = nx.leaky_relu(nx.conv1d(h, w["fuse.kernel"], w["fuse.bias"]), slope)
    out = nx.conv1d(h, w["head.kernel"], w["head.bias"])
    if squeeze:
        out = out.reshape(out.shape[1:])
    return out
