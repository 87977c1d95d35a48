"""Parameter layout, initialisation, counting and checkpoint persistence."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import container
from ..errors import ConfigurationError, DimensionError, MalformedHeaderError
from ..numerics import AdamState, Tensor
from .config import (
    ModelConfig,
    TransformerConfig,
    UNetConfig,
    config_from_dict,
    config_to_dict,
)

CHECKPOINT_MAGIC = "RDNCKPT"
CHECKPOINT_VERSION = 1

# init kinds: "glorot" (fan-in/fan-out uniform), "zeros", "ones"
ParamSpec = dict[str, tuple[tuple[int, ...], str]]


@dataclass
class ModelParams:
    config: ModelConfig
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def tensors(self, requires_grad: bool = True) -> dict[str, Tensor]:
        return {k: Tensor(v, requires_grad=requires_grad) for k, v in self.arrays.items()}

    def astype(self, dtype) -> ModelParams:
        return ModelParams(self.config, {k: v.astype(dtype) for k, v in self.arrays.items()})

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.arrays):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.arrays[name]).tobytes())
        return h.hexdigest()[:16]


def param_spec(config: ModelConfig) -> ParamSpec:
    """Ordered name -> (shape, init kind) table for a configuration."""
    spec: ParamSpec = {}
    if isinstance(config, TransformerConfig):
        d, f = config.d_model, config.ffn_dim
        spec["input_projection.weight"] = ((config.input_channels, d), "glorot")
        spec["input_projection.bias"] = ((d,), "zeros")
        for i in range(config.n_layers):
            p = f"layer{i}"
            for role in ("query", "key", "value", "output"):
                spec[f"{p}.attention.{role}.weight"] = ((d, d), "glorot")
                spec[f"{p}.attention.{role}.bias"] = ((d,), "zeros")
            if config.use_layer_norm:
                spec[f"{p}.norm1.gamma"] = ((d,), "ones")
                spec[f"{p}.norm1.beta"] = ((d,), "zeros")
            spec[f"{p}.ffn.hidden.weight"] = ((d, f), "glorot")
            spec[f"{p}.ffn.hidden.bias"] = ((f,), "zeros")
            spec[f"{p}.ffn.output.weight"] = ((f, d), "glorot")
            spec[f"{p}.ffn.output.bias"] = ((d,), "zeros")
            if config.use_layer_norm:
                spec[f"{p}.norm2.gamma"] = ((d,), "ones")
                spec[f"{p}.norm2.beta"] = ((d,), "zeros")
        spec["output_projection.weight"] = ((d, config.input_channels), "glorot")
        spec["output_projection.bias"] = ((config.input_channels,), "zeros")
    elif isinstance(config, UNetConfig):
        k, c0 = config.kernel_size, config.input_channels
        c1, c2, c3 = config.enc1_channels, config.enc2_channels, config.final_channels
        spec["enc1.kernel"] = ((k, c0, c1), "glorot")
        spec["enc1.bias"] = ((c1,), "zeros")
        spec["enc2.kernel"] = ((k, c1, c2), "glorot")
        spec["enc2.bias"] = ((c2,), "zeros")
        spec["fuse.kernel"] = ((k, c1 + c2, c3), "glorot")
        spec["fuse.bias"] = ((c3,), "zeros")
        spec["head.kernel"] = ((1, c3, c0), "glorot")
        spec["head.bias"] = ((c0,), "zeros")
    else:
        raise ConfigurationError(f"unsupported model config {type(config).__name__}")
    return spec


def glorot_limit(shape: tuple[int, ...]) -> float:
    if len(shape) == 2:
        fan_in, fan_out = shape
    else:
        receptive = int(np.prod(shape[:-2]))
        fan_in, fan_out = shape[-2] * receptive, shape[-1] * receptive
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_params(config: ModelConfig, seed: int = 0, dtype=np.float64) -> ModelParams:
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, (shape, kind) in param_spec(config).items():
        if kind == "glorot":
            a = glorot_limit(shape)
            arrays[name] = rng.uniform(-a, a, size=shape).astype(dtype)
        elif kind == "ones":
            arrays[name] = np.ones(shape, dtype=dtype)
        else:
            arrays[name] = np.zeros(shape, dtype=dtype)
    return ModelParams(config, arrays)


def count_params(params: ModelParams | dict) -> int:
    arrays = params.arrays if isinstance(params, ModelParams) else params
    return int(sum(np.asarray(a).size for a in arrays.values()))


def check_layout(params: ModelParams) -> None:
    spec = param_spec(params.config)
    if list(spec) != list(params.arrays):
        missing = sorted(set(spec) - set(params.arrays))
        extra = sorted(set(params.arrays) - set(spec))
        raise DimensionError(f"parameter names do not match config (missing {missing}, extra {extra})")
    for name, (shape, _) in spec.items():
        if params.arrays[name].shape != shape:
            raise DimensionError(f"{name}: shape {params.arrays[name].shape}, config implies {shape}")


# -- checkpoints ------------------------------------------------------------------

def save_checkpoint(
    path,
    params: ModelParams,
    optimizer: AdamState | None = None,
    extra: dict | None = None,
) -> Path:
    """Write parameters (and optionally Adam moments and JSON-able extras)."""
    meta = {"config": config_to_dict(params.config), "extra": extra or {}}
    arrays = {f"param/{k}": v for k, v in params.arrays.items()}
    if optimizer is not None:
        meta["optimizer"] = {
            "learning_rate": optimizer.learning_rate,
            "beta1": optimizer.beta1,
            "beta2": optimizer.beta2,
            "epsilon": optimizer.epsilon,
            "step_count": optimizer.step_count,
        }
        for k in params.arrays:
            if k in optimizer.first_moment:
                arrays[f"adam_m/{k}"] = optimizer.first_moment[k]
                arrays[f"adam_v/{k}"] = optimizer.second_moment[k]
    return container.write(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, meta, arrays)


def load_checkpoint(path) -> tuple[ModelParams, AdamState | None, dict]:
    header, arrays = container.read(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    try:
        config = config_from_dict(header["config"])
    except (KeyError, TypeError, ConfigurationError) as exc:
        raise MalformedHeaderError(f"bad checkpoint config: {exc}") from None
    params = ModelParams(
        config, {k.split("/", 1)[1]: v for k, v in arrays.items() if k.startswith("param/")}
    )
    check_layout(params)
    optimizer = None
    if "optimizer" in header:
        o = header["optimizer"]
        optimizer = AdamState(
            learning_rate=o["learning_rate"],
            beta1=o["beta1"],
            beta2=o["beta2"],
            epsilon=o["epsilon"],
            step_count=o["step_count"],
            first_moment={k[7:]: v for k, v in arrays.items() if k.startswith("adam_m/")},
            second_moment={k[7:]: v for k, v in arrays.items() if k.startswith("adam_v/")},
        )
    return params, optimizer, header.get("extra", {})
