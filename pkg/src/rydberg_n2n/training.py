"""Noisy-pair training loop, convergence rule and prediction."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import numerics as nx
from .dataio import DatasetSplit, TraceSet, batch_indices, standardize_array
from .errors import ConfigurationError, DimensionError, NumericalAbort
from .models import (
    ModelConfig,
    ModelParams,
    TransformerConfig,
    config_to_dict,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)

log = logging.getLogger(__name__)

_DTYPES = {"float32": np.float32, "float64": np.float64}


@dataclass
class TrainConfig:
    model: ModelConfig = field(default_factory=TransformerConfig)
    epochs_max: int = 100
    batch_size: int = 32
    window: int = 10
    tolerance: float = 1e-3
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.epochs_max < self.window:
            raise ConfigurationError(
                f"epochs_max ({self.epochs_max}) must be at least the convergence window ({self.window})"
            )
        if self.window < 1:
            raise ConfigurationError("window must be at least 1")
        if not self.tolerance > 0:
            raise ConfigurationError(f"tolerance must be positive, got {self.tolerance}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be non-negative")
        if self.dtype not in _DTYPES:
            raise ConfigurationError(f"dtype must be one of {sorted(_DTYPES)}, got {self.dtype!r}")

    @property
    def np_dtype(self):
        return _DTYPES[self.dtype]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = config_to_dict(self.model)
        return d


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    seconds: float
    checksum: str


@dataclass
class TrainLog:
    epochs: list[EpochRecord] = field(default_factory=list)
    converged_at_epoch: int | None = None

    @property
    def losses(self) -> list[float]:
        return [e.loss for e in self.epochs]

    def to_dict(self) -> dict:
        return {"epochs": [asdict(e) for e in self.epochs], "converged_at_epoch": self.converged_at_epoch}

    @classmethod
    def from_dict(cls, d: dict) -> TrainLog:
        return cls([EpochRecord(**e) for e in d.get("epochs", [])], d.get("converged_at_epoch"))

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss", "seconds", "checksum"])
            for e in self.epochs:
                w.writerow([e.epoch, repr(e.loss), f"{e.seconds:.6f}", e.checksum])
        return path


def has_converged(losses, window: int = 10, tolerance: float = 1e-3, floor: float = 1e-12) -> bool:
    """True when the last ``window`` losses vary by less than ``tolerance`` relative to their mean."""
    if isinstance(losses, TrainLog):
        losses = losses.losses
    if len(losses) < window:
        return False
    tail = np.asarray(losses[-window:], dtype=np.float64)
    spread = tail.max() - tail.min()
    return bool(spread / max(abs(tail.mean()), floor) < tolerance)


def _prepare(traces: TraceSet, dtype) -> np.ndarray:
    standardized, _ = standardize_array(traces.data)
    return standardized.astype(dtype)[..., None]


def train(
    split: DatasetSplit,
    cfg: TrainConfig,
    *,
    resume=None,
    checkpoint_path=None,
    stop_after: int | None = None,
) -> tuple[ModelParams, TrainLog]:
    """Fit the model to map each input trace onto its independently-noisy label.

    Both partitions are standardized per trace (idempotent if the caller
    already did so).  ``resume`` names a checkpoint written by an earlier
    call; since batch order and dropout masks derive from ``(seed,
    epoch, batch)``, resuming reproduces an uninterrupted run exactly.
    ``stop_after`` ends the run after that many epochs in this call.
    """
    dtype = cfg.np_dtype
    x = _prepare(split.train_x, dtype)
    y = _prepare(split.train_y, dtype)
    if x.shape[1] != cfg.model.seq_len:
        raise DimensionError(f"traces have {x.shape[1]} points, model expects {cfg.model.seq_len}")

    if resume is not None:
        params, state, extra = load_checkpoint(resume)
        if config_to_dict(params.config) != config_to_dict(cfg.model):
            raise ConfigurationError("checkpoint model config differs from the training config")
        params = params.astype(dtype)
        state.learning_rate = cfg.learning_rate
        train_log = TrainLog.from_dict(extra.get("log", {}))
    else:
        params = init_params(cfg.model, cfg.seed, dtype)
        state = nx.AdamState(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
        train_log = TrainLog()

    n = x.shape[0]
    start = len(train_log.epochs)
    done_here = 0
    grad_norm = float("nan")
    for epoch in range(start + 1, cfg.epochs_max + 1):
        if train_log.converged_at_epoch is not None:
            break
        if stop_after is not None and done_here >= stop_after:
            break
        t0 = time.perf_counter()
        total = 0.0
        for b, idx in enumerate(batch_indices(n, cfg.batch_size, [cfg.seed, epoch])):
            weights = params.tensors(requires_grad=True)
            out = forward(x[idx], params, "train", [cfg.seed, epoch, b], weights)
            loss = nx.mse_loss(out, y[idx])
            value = float(loss.data)
            if not math.isfinite(value):
                raise NumericalAbort(epoch, b, grad_norm)
            grads = nx.backward(loss, weights.values())
            named = {k: grads[t] for k, t in weights.items()}
            grad_norm = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in named.values()))
            if not math.isfinite(grad_norm):
                raise NumericalAbort(epoch, b, grad_norm, "non-finite gradient")
            arrays, state = nx.adam_step(params.arrays, named, state)
            params = ModelParams(params.config, arrays)
            total += value * len(idx)
        record = EpochRecord(epoch, total / n, time.perf_counter() - t0, params.checksum())
        train_log.epochs.append(record)
        done_here += 1
        log.info("epoch %d loss %.6g (%.1f s)", epoch, record.loss, record.seconds)
        if has_converged(train_log.losses, cfg.window, cfg.tolerance):
            train_log.converged_at_epoch = epoch
        if checkpoint_path is not None:
            save_checkpoint(
                checkpoint_path,
                params,
                state,
                {"log": train_log.to_dict(), "train_config": cfg.to_dict()},
            )
    return params, train_log


def predict(params: ModelParams, test: TraceSet, batch_size: int = 16) -> TraceSet:
    """Denoise each trace: standardize by its own statistics, run the model, map back."""
    if test.n_points != params.config.seq_len:
        raise DimensionError(
            f"input traces have {test.n_points} points, model was built for {params.config.seq_len}"
        )
    dtype = next(iter(params.arrays.values())).dtype
    standardized, record = standardize_array(test.data)
    out = np.empty(test.data.shape, dtype=np.float64)
    for i in range(0, test.n_sets, batch_size):
        xb = standardized[i : i + batch_size].astype(dtype)[..., None]
        out[i : i + batch_size] = forward(xb, params, "infer").data[..., 0]
    out = out * record.sigma[:, None] + record.mu[:, None]
    return TraceSet(out, test.axis)
