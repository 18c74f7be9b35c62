"""Central finite-difference gradient checks"""
from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor

FD_STEP = 1e-5


def numerical_gradient(value: Callable[[], float], array: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """d value / d array by central differences; array is perturbed in place and restored"""
    flat = array.reshape(-1)
    if not np.shares_memory(flat, array):
        raise ValueError("numerical_gradient needs a contiguous array")
    grad = np.zeros(array.size, dtype=np.float64)
    for idx in range(flat.size):
        original = flat[idx]
        flat[idx] = original + h
        plus = value()
        flat[idx] = original - h
        minus = value()
        flat[idx] = original
        grad[idx] = (plus - minus) / (2.0 * h)
    return grad.reshape(array.shape)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(loss_fn: Callable[[], Tensor], inputs: Sequence[Tensor], h: float = FD_STEP) -> float:
    """Largest relative error between tape gradients and finite differences over inputs"""
    for tensor in inputs:
        if not tensor.data.flags.c_contiguous or not tensor.data.flags.writeable:
            tensor.data = np.array(tensor.data, copy=True)
    with Tape() as tape:
        loss = loss_fn()
    analytic = tape.gradient(loss, inputs)

    def value() -> float:
        return float(loss_fn().data)

    return max(
        relative_error(grad, numerical_gradient(value, tensor.data, h))
        for grad, tensor in zip(analytic, inputs)
    )
