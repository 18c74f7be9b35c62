"""
Tensor values and the gradient tape.

A Tensor wraps a numpy array. Operations executed while a Tape is active record a
node (inputs, output, backward rule) whenever one of their inputs requires a
gradient; outside a tape nothing is recorded, so pure forward evaluation never
touches gradient state. One tape per training step, never shared across threads.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ...shared.exceptions import TapeError

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_local = threading.local()


def _tape_stack() -> list["Tape"]:
    stack = getattr(_local, "tapes", None)
    if stack is None:
        stack = []
        _local.tapes = stack
    return stack


def active_tape() -> Optional["Tape"]:
    """Innermost tape of the current thread, if any"""
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """Dense n-dimensional array with optional gradient participation"""

    __slots__ = ("data", "requires_grad", "grad", "name", "_tape")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, dtype=None):
        array = np.asarray(data, dtype=dtype)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float64)
        self.data: np.ndarray = array
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._tape: Optional[Tape] = None

    # Shape helpers

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise TapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    # Operator sugar (see ops.py)

    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.getitem(self, index)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, dtype={self.dtype}{flag})"


@dataclass
class TapeNode:
    kind: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Ordered record of differentiable operations"""

    def __init__(self):
        self.nodes: list[TapeNode] = []
        self.stop_markers: list[Tensor] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc_info) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        elif self in stack:
            stack.remove(self)

    def record(self, kind: str, inputs: Sequence[Tensor], output: Tensor, backward: BackwardFn) -> None:
        output._tape = self
        self.nodes.append(TapeNode(kind, tuple(inputs), output, backward))

    def mark_stop(self, output: Tensor) -> None:
        self.stop_markers.append(output)

    def _check_loss(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss._tape is not self:
            raise TapeError("loss was not recorded on this tape")

    def gradients(self, loss: Tensor) -> dict[int, np.ndarray]:
        """Reverse replay; maps id(tensor) to d loss / d tensor for every reached tensor"""
        self._check_loss(loss)
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            upstream = grads.get(id(node.output))
            if upstream is None:
                continue
            input_grads = node.backward(upstream)
            for tensor, grad in zip(node.inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                grad = np.asarray(grad, dtype=tensor.dtype)
                if grad.shape != tensor.shape:
                    raise TapeError(
                        f"{node.kind} backward produced shape {grad.shape} for input of shape {tensor.shape}"
                    )
                key = id(tensor)
                grads[key] = grads[key] + grad if key in grads else grad
        return grads

    def gradient(self, loss: Tensor, wrt: Sequence[Tensor]) -> list[np.ndarray]:
        """Gradients of loss wrt the given tensors (zeros where unreachable); .grad untouched"""
        grads = self.gradients(loss)
        return [grads.get(id(t), np.zeros_like(t.data)) for t in wrt]

    def backward(self, loss: Tensor) -> None:
        """Accumulate gradients into .grad of every reached leaf tensor"""
        grads = self.gradients(loss)
        seen: set[int] = set()
        for node in self.nodes:
            for tensor in node.inputs:
                key = id(tensor)
                if key in seen or tensor._tape is self or key not in grads:
                    continue
                seen.add(key)
                tensor.grad = grads[key].copy() if tensor.grad is None else tensor.grad + grads[key]


def backward(loss: Tensor) -> None:
    """Backpropagate a scalar loss through the tape that recorded it"""
    if loss._tape is None:
        raise TapeError("loss is not on a tape (was it computed inside `with Tape():`?)")
    loss._tape.backward(loss)


def stop_gradient(x: Tensor) -> Tensor:
    """Same values, no backward edge"""
    out = Tensor(x.data, requires_grad=False)
    tape = active_tape()
    if tape is not None and x.requires_grad:
        tape.mark_stop(out)
    return out


def parameter(data, name: Optional[str] = None, dtype=None) -> Tensor:
    """Leaf tensor that requires a gradient"""
    return Tensor(np.array(data, dtype=dtype), requires_grad=True, name=name)
