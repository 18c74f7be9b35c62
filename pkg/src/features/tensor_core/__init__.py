"""Dense tensors with reverse-mode automatic differentiation"""
from .ops import (
    absolute,
    add,
    apply_linear,
    concat,
    conv2d,
    conv2d_transpose,
    elementwise,
    getitem,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    scale,
    spatial_softmax,
    square,
    stack,
    sub,
    transpose,
    tsum,
)
from .tensor import Tape, Tensor, active_tape, backward, parameter, stop_gradient

__all__ = [
    "Tape",
    "Tensor",
    "absolute",
    "active_tape",
    "add",
    "apply_linear",
    "backward",
    "concat",
    "conv2d",
    "conv2d_transpose",
    "elementwise",
    "getitem",
    "matmul",
    "mean",
    "mul",
    "parameter",
    "relu",
    "reshape",
    "scale",
    "spatial_softmax",
    "square",
    "stack",
    "stop_gradient",
    "sub",
    "transpose",
    "tsum",
]
