"""
Proxy training data.

The image estimator's own predictions stand in for ground truth: each proxy
image is measured again with a freshly sampled operator and fresh noise, so the
networks get fully supervised samples whose parameters are known.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ...shared.exceptions import ShapeMismatchError
from ...shared.rng import derive_seed, stream
from ..measurement.distributions import ParamDistribution
from ..measurement.operators import GaussianNoise, MeasurementOp, measure
from ..tensor_core import Tensor, stop_gradient

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProxySample:
    """x+ (gradient-isolated), theta+ and y+ = theta+ x+ + eps+"""
    x_plus: Tensor
    theta_plus: MeasurementOp
    eps_seed: int
    y_plus: Tensor
    noise: GaussianNoise
    mask: Optional[np.ndarray] = None

    def regenerate(self) -> Tensor:
        """Rebuild y+ from the stored fields"""
        return measure(self.theta_plus, self.x_plus.data, self.noise, self.eps_seed)

    def loss_weights(self) -> Optional[np.ndarray]:
        """Pixels where both x+ is meaningful and f(y+) is defined"""
        coverage = self.theta_plus.coverage_mask()
        weights = None if coverage.all() else coverage.astype(np.float64)
        if self.mask is not None:
            weights = self.mask.astype(np.float64) if weights is None else weights * self.mask
        return weights


def make_proxy_batch(
    predictions: Sequence[Tensor],
    dist: ParamDistribution,
    noise: GaussianNoise,
    seed: int,
    step: int,
    masks: Optional[Sequence[Optional[np.ndarray]]] = None,
) -> list[ProxySample]:
    """
    One proxy sample per prediction f(y).

    theta+ and eps+ come from streams keyed on (seed, step, index), so every
    step draws new parameters while a given step stays reproducible.
    """
    masks = list(masks) if masks is not None else [None] * len(predictions)
    if len(masks) != len(predictions):
        raise ShapeMismatchError(f"{len(predictions)} predictions but {len(masks)} masks")
    samples = []
    for index, (prediction, mask) in enumerate(zip(predictions, masks)):
        if tuple(prediction.shape) != tuple(dist.image_shape):
            raise ShapeMismatchError(f"Proxy image {prediction.shape} does not match {dist.image_shape}")
        x_plus = stop_gradient(prediction)
        theta_plus = dist.sample(stream(seed, "proxy", step, index))
        eps_seed = derive_seed(seed, "proxy-noise", step, index)
        y_plus = measure(theta_plus, x_plus.data, noise, eps_seed)
        samples.append(
            ProxySample(x_plus=x_plus, theta_plus=theta_plus, eps_seed=eps_seed, y_plus=y_plus, noise=noise, mask=mask)
        )
    logger.debug(f"Proxy batch of {len(samples)} at step {step}")
    return samples
