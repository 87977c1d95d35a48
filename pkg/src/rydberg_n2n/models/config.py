from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..errors import ConfigurationError, LengthError


@dataclass(frozen=True)
class TransformerConfig:
    """Encoder-stack denoiser.  Defaults reproduce the published architecture."""

    seq_len: int = 1000
    d_model: int = 64
    n_heads: int = 8
    ffn_dim: int = 128
    n_layers: int = 3
    dropout_rate: float = 0.1
    use_layer_norm: bool = True
    use_positional_encoding: bool = True
    input_channels: int = 1

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ConfigurationError(
                f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}"
            )
        if self.d_model % 2:
            raise ConfigurationError(f"d_model must be even for sine encoding, got {self.d_model}")
        if self.seq_len < 2:
            raise ConfigurationError(f"seq_len must be at least 2, got {self.seq_len}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        for name in ("ffn_dim", "n_layers", "input_channels"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")

    kind = "transformer"


@dataclass(frozen=True)
class UNetConfig:
    """Two-scale 1D U-Net.  ``enc2_channels`` and the 1x1 output head are our choices."""

    seq_len: int = 1000
    enc1_channels: int = 24
    enc2_channels: int = 48
    final_channels: int = 48
    kernel_size: int = 3
    pool: int = 2
    upsample: int = 2
    leaky_slope: float = 0.3
    input_channels: int = 1

    def __post_init__(self):
        if self.seq_len % 2:
            raise LengthError(f"U-Net seq_len must be even, got {self.seq_len}")
        if self.kernel_size % 2 == 0:
            raise ConfigurationError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.pool != 2 or self.upsample != 2:
            raise ConfigurationError("only pool=2 / upsample=2 are supported")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ConfigurationError(f"leaky_slope must lie in (0, 1), got {self.leaky_slope}")

    kind = "unet"


ModelConfig = TransformerConfig | UNetConfig

_KINDS = {"transformer": TransformerConfig, "unet": UNetConfig}


def config_to_dict(config: ModelConfig) -> dict:
    return {"kind": config.kind, **asdict(config)}


def config_from_dict(data: dict) -> ModelConfig:
    data = dict(data)
    kind = data.pop("kind", None)
    if kind not in _KINDS:
        raise ConfigurationError(f"unknown model kind {kind!r}; expected one of {sorted(_KINDS)}")
    cls = _KINDS[kind]
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"unknown {kind} config key(s): {', '.join(unknown)}")
    return cls(**data)
