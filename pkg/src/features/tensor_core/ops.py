"""
Differentiable operations on Tensors.

Convolutions use the cross-correlation convention (no kernel flip). Layout is
(N, C, H, W) for activations, or (C, H, W) for a single sample, and kernels are
(C_out, C_in, kh, kw). conv2d_transpose takes the kernel of the conv2d it is the
adjoint of and maps C_out channels back to C_in.

"same" padding yields out = ceil(in / stride); when the total padding is odd the
extra row/column goes to the bottom/right.
"""
from __future__ import annotations

import logging
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ...shared.config import settings
from ...shared.exceptions import NumericalFailureError, ShapeMismatchError
from .tensor import BackwardFn, Tensor, active_tape

logger = logging.getLogger(__name__)

TensorLike = Union[Tensor, np.ndarray, float, int]

BINARY_KINDS = ("add", "sub", "mul")
UNARY_KINDS = ("relu", "square", "abs", "neg")
PADDING_MODES = {"same": "same", "same-zero": "same", "valid": "valid"}


def as_tensor(value: TensorLike, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def _result(kind: str, data: np.ndarray, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    """Wrap an output and record it when a tape is active and an input needs a gradient"""
    tape = active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=track)
    if settings.debug_numerics:
        _check_finite(kind, out.data, inputs)
    if track:
        tape.record(kind, inputs, out, backward)
    return out


def _check_finite(kind: str, data: np.ndarray, inputs: Sequence[Tensor]) -> None:
    if np.all(np.isfinite(data)):
        return
    if all(np.all(np.isfinite(t.data)) for t in inputs):
        raise NumericalFailureError(f"{kind} produced non-finite values from finite inputs")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back to the operand shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ==========================================
# ELEMENTWISE
# ==========================================

def elementwise(op_kind: str, a: TensorLike, b: Optional[TensorLike] = None) -> Tensor:
    """Binary kinds: add, sub, mul. Unary kinds: relu, square, abs, neg"""
    if op_kind in BINARY_KINDS:
        if b is None:
            raise ShapeMismatchError(f"{op_kind} needs two operands")
        a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
        b = as_tensor(b, like=a)
        try:
            np.broadcast_shapes(a.shape, b.shape)
        except ValueError:
            raise ShapeMismatchError(f"Cannot broadcast shapes {a.shape} and {b.shape} for {op_kind}")
        return _binary(op_kind, a, b)
    if op_kind in UNARY_KINDS:
        if b is not None:
            raise ShapeMismatchError(f"{op_kind} takes a single operand")
        return _unary(op_kind, as_tensor(a))
    raise ValueError(f"Unknown elementwise kind {op_kind!r}")


def _binary(kind: str, a: Tensor, b: Tensor) -> Tensor:
    if kind == "add":
        data = a.data + b.data

        def backward(g):
            return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    elif kind == "sub":
        data = a.data - b.data

        def backward(g):
            return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    else:
        data = a.data * b.data

        def backward(g):
            return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(kind, data, (a, b), backward)


def _unary(kind: str, a: Tensor) -> Tensor:
    if kind == "relu":
        mask = a.data > 0
        data = np.where(mask, a.data, 0).astype(a.dtype)

        def backward(g):
            return (g * mask,)

    elif kind == "square":
        data = a.data * a.data

        def backward(g):
            return (2.0 * a.data * g,)

    elif kind == "abs":
        data = np.abs(a.data)

        def backward(g):
            return (np.sign(a.data) * g,)

    else:
        data = -a.data

        def backward(g):
            return (-g,)

    return _result(kind, data, (a,), backward)


def add(a: TensorLike, b: TensorLike) -> Tensor:
    return elementwise("add", a, b)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    return elementwise("sub", a, b)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    return elementwise("mul", a, b)


def relu(a: TensorLike) -> Tensor:
    return elementwise("relu", a)


def square(a: TensorLike) -> Tensor:
    return elementwise("square", a)


def absolute(a: TensorLike) -> Tensor:
    return elementwise("abs", a)


def scale(a: TensorLike, factor: float) -> Tensor:
    """Multiply by a constant scalar"""
    a = as_tensor(a)
    factor = float(factor)

    def backward(g):
        return (g * factor,)

    return _result("scale", a.data * np.asarray(factor, dtype=a.dtype), (a,), backward)


# ==========================================
# LINEAR ALGEBRA AND SHAPES
# ==========================================

def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    """(..., m, k) @ (k, n); the left operand may carry leading batch axes"""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim != 2:
        raise ShapeMismatchError(f"matmul needs (..., m, k) @ (k, n), got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul inner dimensions differ: {a.shape} and {b.shape}")
    data = a.data @ b.data

    def backward(g):
        grad_a = g @ b.data.T
        grad_b = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return grad_a, grad_b

    return _result("matmul", data, (a, b), backward)


def transpose(a: TensorLike, axes: Optional[Sequence[int]] = None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(range(a.ndim))[::-1] if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return (np.transpose(g, inverse),)

    return _result("transpose", np.transpose(a.data, axes), (a,), backward)


def reshape(a: TensorLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        data = a.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeMismatchError(f"Cannot reshape {a.shape} to {tuple(shape)}")

    def backward(g):
        return (g.reshape(a.shape),)

    return _result("reshape", data, (a,), backward)


def getitem(a: TensorLike, index) -> Tensor:
    a = as_tensor(a)
    data = a.data[index]

    def backward(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, index, g)
        return (grad,)

    return _result("getitem", np.array(data), (a,), backward)


def concat(tensors: Sequence[TensorLike], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeMismatchError("concat of an empty sequence")
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise ShapeMismatchError(f"Cannot concatenate shapes {shapes} on axis {axis}: {str(e)}")
    boundaries = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, boundaries, axis=axis))

    return _result("concat", data, tuple(tensors), backward)


def stack(tensors: Sequence[TensorLike], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise ShapeMismatchError(f"stack needs equal shapes, got {sorted(shapes)}")
    data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _result("stack", data, tuple(tensors), backward)


def tsum(a: TensorLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result("sum", np.asarray(data), (a,), backward)


def mean(a: TensorLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = range(a.ndim) if axis is None else np.atleast_1d(axis)
    count = int(np.prod([a.shape[i] for i in axes])) if a.ndim else 1
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / max(count, 1))


def apply_linear(
    x: TensorLike,
    forward: Callable[[np.ndarray], np.ndarray],
    adjoint: Callable[[np.ndarray], np.ndarray],
    kind: str = "linear",
) -> Tensor:
    """Apply a linear map given as a forward/adjoint pair of array functions"""
    x = as_tensor(x)

    def backward(g):
        return (adjoint(g),)

    return _result(kind, np.asarray(forward(x.data)), (x,), backward)


def spatial_softmax(x: TensorLike) -> Tensor:
    """Softmax over the last two axes (max-subtracted)"""
    x = as_tensor(x)
    if x.ndim < 2:
        raise ShapeMismatchError(f"spatial_softmax needs at least 2 axes, got {x.shape}")
    flat = x.data.reshape(*x.shape[:-2], -1)
    exp = np.exp(flat - flat.max(axis=-1, keepdims=True))
    probs = exp / exp.sum(axis=-1, keepdims=True)

    def backward(g):
        gf = g.reshape(probs.shape)
        return ((probs * (gf - (gf * probs).sum(axis=-1, keepdims=True))).reshape(x.shape),)

    return _result("spatial_softmax", probs.reshape(x.shape), (x,), backward)


# ==========================================
# CONVOLUTION
# ==========================================

def _padding_mode(padding: str) -> str:
    mode = PADDING_MODES.get(padding)
    if mode is None:
        raise ShapeMismatchError(f"Unknown padding mode {padding!r}; use same or valid")
    return mode


def conv_geometry(size: int, kernel: int, stride: int, padding: str) -> tuple[int, int, int]:
    """(output size, pad before, pad after) along one axis"""
    if stride < 1:
        raise ShapeMismatchError(f"stride must be >= 1, got {stride}")
    if _padding_mode(padding) == "valid":
        if size < kernel:
            raise ShapeMismatchError(f"Kernel of size {kernel} larger than input of size {size}")
        return (size - kernel) // stride + 1, 0, 0
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return out, total // 2, total - total // 2


def _window(xp: np.ndarray, i: int, j: int, stride: int, out_hw: tuple[int, int]) -> tuple:
    ho, wo = out_hw
    return (
        slice(None),
        slice(None),
        slice(i, i + stride * (ho - 1) + 1, stride),
        slice(j, j + stride * (wo - 1) + 1, stride),
    )


def _correlate(xp: np.ndarray, k: np.ndarray, stride: int, out_hw: tuple[int, int]) -> np.ndarray:
    n = xp.shape[0]
    o, _, kh, kw = k.shape
    out = np.zeros((n, o) + tuple(out_hw), dtype=np.result_type(xp, k))
    for i in range(kh):
        for j in range(kw):
            window = xp[_window(xp, i, j, stride, out_hw)]
            out += np.tensordot(k[:, :, i, j], window, axes=([1], [1])).transpose(1, 0, 2, 3)
    return out


def _correlate_adjoint(g: np.ndarray, k: np.ndarray, stride: int, padded_hw: tuple[int, int]) -> np.ndarray:
    n, _, ho, wo = g.shape
    _, c, kh, kw = k.shape
    xp = np.zeros((n, c) + tuple(padded_hw), dtype=np.result_type(g, k))
    for i in range(kh):
        for j in range(kw):
            contribution = np.tensordot(k[:, :, i, j], g, axes=([0], [1])).transpose(1, 0, 2, 3)
            xp[_window(xp, i, j, stride, (ho, wo))] += contribution
    return xp


def _kernel_gradient(xp: np.ndarray, g: np.ndarray, stride: int, kernel_hw: tuple[int, int]) -> np.ndarray:
    _, o, ho, wo = g.shape
    c = xp.shape[1]
    kh, kw = kernel_hw
    dk = np.zeros((o, c, kh, kw), dtype=np.result_type(xp, g))
    for i in range(kh):
        for j in range(kw):
            window = xp[_window(xp, i, j, stride, (ho, wo))]
            dk[:, :, i, j] = np.tensordot(g, window, axes=([0, 2, 3], [0, 2, 3]))
    return dk


def _batched(x: Tensor, name: str) -> tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x.data[None], True
    if x.ndim == 4:
        return x.data, False
    raise ShapeMismatchError(f"{name} expects (N, C, H, W) or (C, H, W), got {x.shape}")


def conv2d(x: TensorLike, k: TensorLike, stride: int = 1, padding: str = "same") -> Tensor:
    """Cross-correlation of x with k"""
    x, k = as_tensor(x), as_tensor(k)
    xd, single = _batched(x, "conv2d")
    if k.ndim != 4:
        raise ShapeMismatchError(f"conv2d kernel must be (C_out, C_in, kh, kw), got {k.shape}")
    if xd.shape[1] != k.shape[1]:
        raise ShapeMismatchError(f"conv2d input channels {x.shape} do not match kernel {k.shape}")
    h, w = xd.shape[2:]
    kh, kw = k.shape[2:]
    ho, top, bottom = conv_geometry(h, kh, stride, padding)
    wo, left, right = conv_geometry(w, kw, stride, padding)
    xp = np.pad(xd, ((0, 0), (0, 0), (top, bottom), (left, right)))
    out = _correlate(xp, k.data, stride, (ho, wo))

    def backward(g):
        g4 = g[None] if single else g
        dxp = _correlate_adjoint(g4, k.data, stride, xp.shape[2:])
        dx = dxp[:, :, top : top + h, left : left + w]
        dk = _kernel_gradient(xp, g4, stride, (kh, kw))
        return (dx[0] if single else dx), dk

    return _result("conv2d", out[0] if single else out, (x, k), backward)


def conv2d_transpose(
    x: TensorLike,
    k: TensorLike,
    stride: int = 1,
    padding: str = "same",
    output_size: Optional[tuple[int, int]] = None,
) -> Tensor:
    """Adjoint of conv2d(., k, stride, padding) on inputs of spatial size output_size"""
    x, k = as_tensor(x), as_tensor(k)
    xd, single = _batched(x, "conv2d_transpose")
    if k.ndim != 4:
        raise ShapeMismatchError(f"conv2d_transpose kernel must be (C_out, C_in, kh, kw), got {k.shape}")
    if xd.shape[1] != k.shape[0]:
        raise ShapeMismatchError(f"conv2d_transpose input channels {x.shape} do not match kernel {k.shape}")
    ho, wo = xd.shape[2:]
    kh, kw = k.shape[2:]
    mode = _padding_mode(padding)
    if output_size is None:
        output_size = (ho * stride, wo * stride) if mode == "same" else (
            (ho - 1) * stride + kh,
            (wo - 1) * stride + kw,
        )
    h, w = output_size
    out_h, top, bottom = conv_geometry(h, kh, stride, padding)
    out_w, left, right = conv_geometry(w, kw, stride, padding)
    if (out_h, out_w) != (ho, wo):
        raise ShapeMismatchError(
            f"conv2d_transpose input {x.shape} inconsistent with output size {tuple(output_size)}"
        )
    padded = (h + top + bottom, w + left + right)
    out = _correlate_adjoint(xd, k.data, stride, padded)[:, :, top : top + h, left : left + w]
    pads = ((0, 0), (0, 0), (top, bottom), (left, right))

    def backward(g):
        gp = np.pad(g[None] if single else g, pads)
        dx = _correlate(gp, k.data, stride, (ho, wo))
        dk = _kernel_gradient(gp, xd, stride, (kh, kw))
        return (dx[0] if single else dx), dk

    return _result("conv2d_transpose", np.ascontiguousarray(out[0] if single else out), (x, k), backward)
