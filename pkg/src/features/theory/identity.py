"""
Monte-Carlo check of the expected swap-loss identity for linear estimators.

For f(y) = W theta^T y, independent theta1, theta2 from the family and
y_i = theta_i x + eps_i, the expected swap loss (sum-of-squares integrand)
equals 2 sigma^2 E[M] + 2 E[(f - x)^T Q (f - x)], Q = E[theta^T theta].
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ...shared.exceptions import NumericalFailureError, ShapeMismatchError
from ...shared.rng import derive_seed, stream
from .families import GaussianImagePrior, OperatorFamily

logger = logging.getLogger(__name__)

CHUNK_SIZE = 10_000


@dataclass
class IdentityResult:
    lhs: float
    rhs: float
    rel_err: float
    lhs_se: float
    n_samples: int


@dataclass
class SlotDraw:
    """One measurement slot for a chunk of samples"""
    theta: np.ndarray
    mask: np.ndarray
    eps: np.ndarray
    y: np.ndarray
    index: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return np.einsum("cmn,cm->cn", self.theta, self.y)

    def apply(self, images: np.ndarray) -> np.ndarray:
        return np.einsum("cmn,cn->cm", self.theta, images)


def draw_slot(family: OperatorFamily, x: np.ndarray, sigma: float, rng: np.random.Generator) -> SlotDraw:
    index = family.draw(rng, len(x))
    theta, mask = family.padded[index], family.row_mask[index]
    eps = sigma * rng.standard_normal(mask.shape) * mask
    return SlotDraw(theta, mask, eps, np.einsum("cmn,cn->cm", theta, x) + eps, index)


def relative_error(lhs: float, rhs: float) -> float:
    if rhs == 0.0:
        return 0.0 if lhs == 0.0 else float("inf")
    return abs(lhs - rhs) / abs(rhs)


def _check_estimator(w: np.ndarray, family: OperatorFamily) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (family.n_pixels, family.n_pixels):
        raise ShapeMismatchError(f"Linear estimator {w.shape} does not act on {family.n_pixels} pixels")
    return w


def mc_swap_identity(
    w: np.ndarray,
    family: OperatorFamily,
    prior: GaussianImagePrior,
    sigma: float,
    n_samples: int,
    seed: int = 0,
) -> IdentityResult:
    """Both sides of the identity estimated over the same n_samples draws"""
    w = _check_estimator(w, family)
    q = family.gram()
    swap_terms, quad_terms = [], []
    for chunk, start in enumerate(range(0, n_samples, CHUNK_SIZE)):
        count = min(CHUNK_SIZE, n_samples - start)
        rng = stream(seed, "identity", chunk)
        x = prior.sample(rng, count)
        first, second = draw_slot(family, x, sigma, rng), draw_slot(family, x, sigma, rng)
        f1, f2 = first.z @ w.T, second.z @ w.T
        swap = np.sum((second.apply(f1) - second.y) ** 2, axis=1) + np.sum((first.apply(f2) - first.y) ** 2, axis=1)
        d1, d2 = f1 - x, f2 - x
        quad = np.einsum("cn,nk,ck->c", d1, q, d1) + np.einsum("cn,nk,ck->c", d2, q, d2)
        swap_terms.append(swap)
        quad_terms.append(quad)

    swap = np.concatenate(swap_terms)
    lhs = float(swap.mean())
    rhs = 2.0 * sigma**2 * family.mean_rows() + float(np.concatenate(quad_terms).mean())
    if not (np.isfinite(lhs) and np.isfinite(rhs)):
        raise NumericalFailureError(f"Non-finite identity estimate (lhs {lhs}, rhs {rhs})")
    result = IdentityResult(
        lhs=lhs,
        rhs=rhs,
        rel_err=relative_error(lhs, rhs),
        lhs_se=float(swap.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0,
        n_samples=n_samples,
    )
    logger.debug(f"identity n={n_samples}: lhs {lhs:.6e} rhs {rhs:.6e} rel_err {result.rel_err:.3e}")
    return result


def zero_estimator_expectation(family: OperatorFamily, prior: GaussianImagePrior, sigma: float) -> float:
    """Closed-form expected swap loss of f = 0: 2 sigma^2 E[M] + 2 (tr(Q Sigma) + mu^T Q mu)"""
    return 2.0 * sigma**2 * family.mean_rows() + 2.0 * prior.quadratic_expectation(family.gram())


def convergence_study(
    w: np.ndarray,
    family: OperatorFamily,
    prior: GaussianImagePrior,
    sigma: float,
    sizes: Sequence[int] = (1_000, 10_000, 100_000),
    repetitions: int = 10,
    seed: int = 0,
) -> list[tuple[int, float]]:
    """Mean relative error over repeated runs at each sample size"""
    study = []
    for n in sizes:
        errors = [
            mc_swap_identity(w, family, prior, sigma, n, seed=derive_seed(seed, "convergence", n, r)).rel_err
            for r in range(repetitions)
        ]
        study.append((int(n), float(np.mean(errors))))
        logger.info(f"📈 n={n}: mean rel_err {study[-1][1]:.3e} over {repetitions} runs")
    return study
