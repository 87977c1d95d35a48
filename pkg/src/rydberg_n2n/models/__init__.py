"""Denoiser architectures and their parameter handling."""

from .config import (
    ModelConfig,
    TransformerConfig,
    UNetConfig,
    config_from_dict,
    config_to_dict,
)
from .params import (
    ModelParams,
    count_params,
    init_params,
    load_checkpoint,
    param_spec,
    save_checkpoint,
)
from .transformer import sine_positional_encoding, transformer_forward
from .unet import unet_forward


def forward(trace, params: ModelParams, mode: str = "infer", seed=None, weights=None):
    """Dispatch to the architecture named by ``params.config``."""
    if isinstance(params.config, TransformerConfig):
        return transformer_forward(trace, params, mode, seed, weights)
    return unet_forward(trace, params, mode, seed, weights)


__all__ = [
    "ModelConfig",
    "ModelParams",
    "TransformerConfig",
    "UNetConfig",
    "config_from_dict",
    "config_to_dict",
    "count_params",
    "forward",
    "init_params",
    "load_checkpoint",
    "param_spec",
    "save_checkpoint",
    "sine_positional_encoding",
    "transformer_forward",
    "unet_forward",
]
