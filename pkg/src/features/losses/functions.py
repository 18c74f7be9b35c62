"""
Training objectives.

    L_swap   = rho(theta2 f(y1) - y2) + rho(theta1 f(y2) - y1)
    L_self   = rho(theta1 f(y1) - y1) + rho(theta2 f(y2) - y2)
    L_prox:t = rho(g(y+) - theta+)
    L_prox:x = rho(f(y+) - x+)

Every rho term is a mean over the (mask-weighted) elements of one sample and
the batch loss is the mean over samples. The proxy kernel loss is the one
exception: it sums over kernel taps, then averages over samples.
"""
import logging
from dataclasses import dataclass, fields
from typing import Optional, Sequence, Union

import numpy as np

from ...shared.entities import LossKind, LossWeights
from ...shared.exceptions import ShapeMismatchError
from ..measurement.operators import ConvolutionOp, MeasurementOp
from ..tensor_core import Tensor, absolute, add, getitem, mean, mul, scale, square, stop_gradient, sub, tsum

logger = logging.getLogger(__name__)

TensorLike = Union[Tensor, np.ndarray]
Batch = Union[Tensor, Sequence[TensorLike]]


# ==========================================
# HELPERS
# ==========================================

def _as_tensor(value: TensorLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(np.asarray(value, dtype=np.float64))


def _samples(batch: Batch, name: str) -> list[Tensor]:
    """A batch given as a list of per-sample tensors or one tensor with a leading batch axis"""
    if isinstance(batch, Tensor):
        if batch.ndim < 1:
            raise ShapeMismatchError(f"{name} needs a batch axis, got shape {batch.shape}")
        return [getitem(batch, i) for i in range(batch.shape[0])]
    return [_as_tensor(item) for item in batch]


def _check_batch(**batches: Sequence) -> int:
    sizes = {name: len(items) for name, items in batches.items()}
    if len(set(sizes.values())) != 1:
        raise ShapeMismatchError(f"Batch sizes differ: {sizes}")
    size = next(iter(sizes.values()))
    if size == 0:
        raise ShapeMismatchError("Empty batch")
    return size


def _zero() -> Tensor:
    return Tensor(np.zeros((), dtype=np.float64))


def _batch_mean(terms: list[Tensor]) -> Tensor:
    total = terms[0]
    for term in terms[1:]:
        total = add(total, term)
    return scale(total, 1.0 / len(terms))


def penalty(residual: Tensor, kind: LossKind) -> Tensor:
    """Elementwise |r|^2 or |r|"""
    return square(residual) if LossKind(kind) == LossKind.L2 else absolute(residual)


def rho(residual: Tensor, kind: LossKind = LossKind.L2, weights: Optional[np.ndarray] = None) -> Tensor:
    """Mean penalty over the elements of one sample, optionally mask-weighted"""
    values = penalty(residual, kind)
    if weights is None:
        return mean(values)
    weights = np.broadcast_to(np.asarray(weights, dtype=values.dtype), values.shape)
    total = float(weights.sum())
    if total <= 0.0:
        logger.warning(f"⚠️ No valid elements in a residual of shape {residual.shape}; term contributes 0")
        return _zero()
    return scale(tsum(mul(values, weights)), 1.0 / total)


# ==========================================
# MEASUREMENT-CONSISTENCY LOSSES
# ==========================================

def _measurement_term(
    theta: MeasurementOp, image: Tensor, y: Tensor, kind: LossKind, source: MeasurementOp
) -> Tensor:
    predicted = theta.forward_tensor(image)
    if predicted.shape != y.shape:
        raise ShapeMismatchError(f"theta f(y) has shape {predicted.shape}, measurement has {y.shape}")
    return rho(sub(predicted, y), kind, theta.loss_weights(source))


def swap_loss(
    f_out1: Batch,
    f_out2: Batch,
    theta1: Sequence[MeasurementOp],
    theta2: Sequence[MeasurementOp],
    y1: Batch,
    y2: Batch,
    rho: LossKind = LossKind.L2,
) -> Tensor:
    """Each prediction re-measured with the other operator of its pair"""
    f1, f2, m1, m2 = _samples(f_out1, "f_out1"), _samples(f_out2, "f_out2"), _samples(y1, "y1"), _samples(y2, "y2")
    _check_batch(f_out1=f1, f_out2=f2, theta1=theta1, theta2=theta2, y1=m1, y2=m2)
    terms = [
        add(
            _measurement_term(t2, a, b2, rho, source=t1),
            _measurement_term(t1, b, b1, rho, source=t2),
        )
        for a, b, t1, t2, b1, b2 in zip(f1, f2, theta1, theta2, m1, m2)
    ]
    return _batch_mean(terms)


def self_loss(
    f_out1: Batch,
    f_out2: Batch,
    theta1: Sequence[MeasurementOp],
    theta2: Sequence[MeasurementOp],
    y1: Batch,
    y2: Batch,
    rho: LossKind = LossKind.L2,
) -> Tensor:
    """Each prediction re-measured with its own operator"""
    f1, f2, m1, m2 = _samples(f_out1, "f_out1"), _samples(f_out2, "f_out2"), _samples(y1, "y1"), _samples(y2, "y2")
    _check_batch(f_out1=f1, f_out2=f2, theta1=theta1, theta2=theta2, y1=m1, y2=m2)
    terms = [
        add(
            _measurement_term(t1, a, b1, rho, source=t1),
            _measurement_term(t2, b, b2, rho, source=t2),
        )
        for a, b, t1, t2, b1, b2 in zip(f1, f2, theta1, theta2, m1, m2)
    ]
    return _batch_mean(terms)


# ==========================================
# PROXY AND SUPERVISED LOSSES
# ==========================================

def _kernel_target(theta: Union[ConvolutionOp, TensorLike]) -> Tensor:
    if isinstance(theta, ConvolutionOp):
        return Tensor(theta.kernel)
    return _as_tensor(theta)


def proxy_param_loss(
    g_out: Batch, theta_plus: Sequence[Union[ConvolutionOp, TensorLike]], rho: LossKind = LossKind.L2
) -> Tensor:
    """Kernel estimates against the kernels that generated the proxy measurements"""
    estimates = _samples(g_out, "g_out")
    targets = [_kernel_target(theta) for theta in theta_plus]
    _check_batch(g_out=estimates, theta_plus=targets)
    terms = []
    for estimate, target in zip(estimates, targets):
        if estimate.shape != target.shape:
            raise ShapeMismatchError(f"Estimated kernel {estimate.shape} vs proxy kernel {target.shape}")
        terms.append(tsum(penalty(sub(estimate, target), rho)))
    return _batch_mean(terms)


def _image_term(prediction: Tensor, image: Tensor, kind: LossKind, mask: Optional[np.ndarray]) -> Tensor:
    if prediction.shape != image.shape:
        raise ShapeMismatchError(f"Prediction {prediction.shape} vs target image {image.shape}")
    return rho(sub(prediction, stop_gradient(image)), kind, mask)


def image_loss(
    f_out: Batch,
    targets: Batch,
    rho: LossKind = LossKind.L2,
    weights: Optional[Sequence[Optional[np.ndarray]]] = None,
) -> Tensor:
    """Batch mean of rho(f - x) against fixed target images"""
    predictions, images = _samples(f_out, "f_out"), _samples(targets, "targets")
    _check_batch(f_out=predictions, targets=images)
    masks = list(weights) if weights is not None else [None] * len(predictions)
    terms = [_image_term(p, x, rho, mask) for p, x, mask in zip(predictions, images, masks)]
    return _batch_mean(terms)


def proxy_image_loss(
    f_out_on_yplus: Batch,
    x_plus: Batch,
    rho: LossKind = LossKind.L2,
    weights: Optional[Sequence[Optional[np.ndarray]]] = None,
) -> Tensor:
    """f on proxy measurements against the (gradient-isolated) proxy images"""
    return image_loss(f_out_on_yplus, x_plus, rho, weights)


def supervised_loss(
    f_out: Batch,
    x_true: Batch,
    rho: LossKind = LossKind.L2,
    weights: Optional[Sequence[Optional[np.ndarray]]] = None,
) -> Tensor:
    """Baseline objective against ground-truth images"""
    return image_loss(f_out, x_true, rho, weights)


# ==========================================
# COMBINED OBJECTIVE
# ==========================================

@dataclass
class LossParts:
    """Scalar loss terms of one step; None when a term is not computed"""
    swap: Optional[Tensor] = None
    self_loss: Optional[Tensor] = None
    prox_theta: Optional[Tensor] = None
    prox_x: Optional[Tensor] = None
    supervised: Optional[Tensor] = None

    def values(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name).item()) if getattr(self, f.name) is not None else 0.0 for f in fields(self)}


def combined_objective(parts: LossParts, weights: LossWeights) -> Tensor:
    """L_swap + gamma L_self + alpha L_prox:theta + beta L_prox:x (+ L_sup)"""
    weighted = [
        (parts.swap, 1.0),
        (parts.self_loss, weights.gamma),
        (parts.prox_theta, weights.alpha),
        (parts.prox_x, weights.beta),
        (parts.supervised, 1.0),
    ]
    total = None
    for term, weight in weighted:
        if term is None or weight == 0.0:
            continue
        if term.ndim != 0:
            raise ShapeMismatchError(f"Loss terms must be scalars, got shape {term.shape}")
        contribution = term if weight == 1.0 else scale(term, weight)
        total = contribution if total is None else add(total, contribution)
    return total if total is not None else _zero()
