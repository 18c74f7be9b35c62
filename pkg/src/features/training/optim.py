"""Adam and the plateau learning-rate schedule"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ...shared.constants import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    LR_DROP_FACTOR,
    PLATEAU_MIN_RELATIVE_IMPROVEMENT,
)
from ...shared.exceptions import ShapeMismatchError
from ..tensor_core import Tensor

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First/second moments per parameter (same order as the parameter list)"""
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_params(cls, params: Sequence[Tensor]) -> "AdamState":
        return cls(m=[np.zeros_like(p.data) for p in params], v=[np.zeros_like(p.data) for p in params])


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState, lr: float) -> AdamState:
    """One bias-corrected Adam update; parameters are rebound in place"""
    if len(params) != len(grads):
        raise ShapeMismatchError(f"{len(params)} parameters but {len(grads)} gradients")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    if len(state.m) != len(params):
        raise ShapeMismatchError(f"Adam state holds {len(state.m)} moments for {len(params)} parameters")

    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for index, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g)
        if g.shape != p.shape or state.m[index].shape != p.shape:
            raise ShapeMismatchError(
                f"Parameter {p.name or index}: shape {p.shape}, gradient {g.shape}, moment {state.m[index].shape}"
            )
        state.m[index] = state.beta1 * state.m[index] + (1.0 - state.beta1) * g
        state.v[index] = state.beta2 * state.v[index] + (1.0 - state.beta2) * g * g
        m_hat = state.m[index] / correction1
        v_hat = state.v[index] / correction2
        p.data = (p.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype)
    return state


class PlateauSchedule:
    """
    Divides the learning rate by sqrt(10) when the monitored value has not
    improved by PLATEAU_MIN_RELATIVE_IMPROVEMENT for `patience` epochs; a
    plateau after the last allowed drop asks the trainer to stop.
    """

    def __init__(self, lr: float, drops: int, patience: int, min_relative: float = PLATEAU_MIN_RELATIVE_IMPROVEMENT):
        self.lr = lr
        self.drops_left = drops
        self.patience = patience
        self.min_relative = min_relative
        self.best: Optional[float] = None
        self.stale = 0
        self.should_stop = False

    def improved(self, value: float) -> bool:
        return self.best is None or value < self.best - self.min_relative * abs(self.best)

    def update(self, value: float) -> bool:
        """Record one epoch's value; returns True when it is a new best"""
        if self.improved(value):
            self.best = value
            self.stale = 0
            return True
        self.stale += 1
        if self.stale >= self.patience:
            self.stale = 0
            if self.drops_left > 0:
                self.drops_left -= 1
                self.lr /= LR_DROP_FACTOR
                logger.info(f"📉 Validation plateau: learning rate dropped to {self.lr:.3e}")
            else:
                self.should_stop = True
                logger.warning("Validation plateau after the final learning-rate drop; stopping early")
        return False
