"""Minimal differentiable-array engine: tensors, ops, reverse mode, Adam."""

from .ops import (
    add,
    attention,
    concat,
    conv1d,
    dense,
    dropout,
    gelu,
    layer_norm,
    leaky_relu,
    matmul,
    maxpool1d,
    mean,
    mse_loss,
    mul,
    power,
    reshape,
    softmax,
    sub,
    sum,
    transpose,
    upsample1d,
)
from .optim import AdamState, adam_step
from .tensor import Tensor, as_tensor, backward, debug_mode, set_debug

__all__ = [
    "AdamState",
    "Tensor",
    "adam_step",
    "add",
    "as_tensor",
    "attention",
    "backward",
    "concat",
    "conv1d",
    "debug_mode",
    "dense",
    "dropout",
    "gelu",
    "layer_norm",
    "leaky_relu",
    "matmul",
    "maxpool1d",
    "mean",
    "mse_loss",
    "mul",
    "power",
    "reshape",
    "set_debug",
    "softmax",
    "sub",
    "sum",
    "transpose",
    "upsample1d",
]
