"""
Normal-equation solutions of the supervised and swap objectives for linear
estimators f(y) = W theta^T y, and the noise-floor check.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from ...shared.constants import RANK_THRESHOLD
from ...shared.exceptions import RankDeficientError, SizeLimitError
from ...shared.rng import stream
from ..measurement.gram import QRankReport, q_rank_report
from ..training.evaluation import psnr
from .families import GaussianImagePrior, OperatorFamily
from .identity import SlotDraw, draw_slot

logger = logging.getLogger(__name__)

MAX_SWAP_PIXELS = 64
LSTSQ_CUTOFF = 1e-10


@dataclass
class PairPopulation:
    """Sampled (x, theta1, theta2, eps1, eps2)"""
    x: np.ndarray
    first: SlotDraw
    second: SlotDraw


@dataclass
class OracleResult:
    w_swap: np.ndarray
    w_sup: np.ndarray
    param_dist: float
    psnr_swap: float
    psnr_sup: float
    report: QRankReport
    range_disagreement: float
    null_disagreement: float

    @property
    def psnr_gap(self) -> float:
        return abs(self.psnr_swap - self.psnr_sup)


@dataclass
class FloorResult:
    loss: float
    se: float
    sigma: float

    @property
    def floor(self) -> float:
        return 2.0 * self.sigma**2

    @property
    def excess(self) -> float:
        """How far the loss sits above 2 sigma^2; negative below it"""
        return self.loss - self.floor

    @property
    def passed(self) -> bool:
        return self.loss >= self.floor - 3.0 * self.se

    @property
    def within_band(self) -> bool:
        """Loss inside 2 sigma^2 +- 3 se; reported, the verdict is `passed`"""
        return abs(self.excess) <= 3.0 * self.se


def sample_population(
    family: OperatorFamily, prior: GaussianImagePrior, sigma: float, count: int, seed: int, purpose: str
) -> PairPopulation:
    rng = stream(seed, purpose)
    x = prior.sample(rng, count)
    return PairPopulation(x, draw_slot(family, x, sigma, rng), draw_slot(family, x, sigma, rng))


def _solve(a: np.ndarray, b: np.ndarray, full_rank: bool) -> np.ndarray:
    if full_rank:
        return scipy.linalg.solve(a, b, assume_a="sym")
    return scipy.linalg.lstsq(a, b, cond=LSTSQ_CUTOFF)[0]


def supervised_solution(population: PairPopulation, full_rank: bool = True) -> np.ndarray:
    """argmin_W sum ||W z - x||^2 over both slots"""
    z = np.concatenate([population.first.z, population.second.z])
    x = np.concatenate([population.x, population.x])
    if full_rank:
        return _solve(z.T @ z, z.T @ x, True).T
    return scipy.linalg.lstsq(z, x, cond=LSTSQ_CUTOFF)[0].T


def swap_solution(family: OperatorFamily, population: PairPopulation, full_rank: bool = True) -> np.ndarray:
    """
    argmin_W sum ||theta2 W z1 - y2||^2 + ||theta1 W z2 - y1||^2.

    With w = vec(W) row-major, theta W z = kron(theta, z^T) w, so the normal
    matrix is sum kron(theta^T theta, z z^T); samples are grouped by operator.
    """
    n = family.n_pixels
    if n > MAX_SWAP_PIXELS:
        raise SizeLimitError(f"Swap normal equations have {n * n} unknowns; limited to {MAX_SWAP_PIXELS} pixels")
    z1, z2 = population.first.z, population.second.z
    h = np.zeros((n * n, n * n))
    for k in range(len(family)):
        theta = family.padded[k]
        covariance = z1[population.second.index == k].T @ z1[population.second.index == k]
        covariance += z2[population.first.index == k].T @ z2[population.first.index == k]
        h += np.kron(theta.T @ theta, covariance)
    b = (z2.T @ z1 + z1.T @ z2).ravel()
    return _solve((h + h.T) / 2.0, b, full_rank).reshape(n, n)


def _test_psnr(w: np.ndarray, population: PairPopulation) -> float:
    return psnr(population.first.z @ w.T, population.x)


def _projectors(q: np.ndarray, report: QRankReport) -> tuple[np.ndarray, np.ndarray]:
    _, vectors = scipy.linalg.eigh(q)
    # eigh is ascending; the rank largest span range(Q)
    basis = vectors[:, q.shape[0] - report.rank :]
    on_range = basis @ basis.T
    return on_range, np.eye(q.shape[0]) - on_range


def linear_oracle(
    family: OperatorFamily,
    prior: GaussianImagePrior,
    sigma: float,
    n_train: int,
    n_test: int,
    seed: int = 0,
    allow_rank_deficient: bool = False,
    threshold: float = RANK_THRESHOLD,
) -> OracleResult:
    """Swap-trained vs supervised-trained linear estimators on one population"""
    q = family.gram()
    report = q_rank_report(q, threshold)
    if not report.full_rank:
        smallest = ", ".join(f"{v:.2e}" for v in report.eigenvalues[report.rank :][:4])
        message = (
            f"Q is rank deficient: rank {report.rank} of {q.shape[0]}, null space of dimension "
            f"{report.null_dim} (eigenvalues {smallest})"
        )
        if not allow_rank_deficient:
            raise RankDeficientError(message, report.null_dim, report.eigenvalues)
        logger.warning(f"⚠️ {message}; using minimum-norm solutions")

    train = sample_population(family, prior, sigma, n_train, seed, "oracle-train")
    test = sample_population(family, prior, sigma, n_test, seed, "oracle-test")
    w_sup = supervised_solution(train, report.full_rank)
    w_swap = swap_solution(family, train, report.full_rank)

    on_range, on_null = _projectors(q, report)
    scale = max(float(np.linalg.norm(on_range @ w_sup @ on_range)), np.finfo(float).tiny)
    difference = w_swap - w_sup
    result = OracleResult(
        w_swap=w_swap,
        w_sup=w_sup,
        param_dist=float(np.linalg.norm(difference) / max(np.linalg.norm(w_sup), np.finfo(float).tiny)),
        psnr_swap=_test_psnr(w_swap, test),
        psnr_sup=_test_psnr(w_sup, test),
        report=report,
        range_disagreement=float(np.linalg.norm(on_range @ difference @ on_range)) / scale,
        null_disagreement=float(np.linalg.norm(on_null @ difference @ on_range)) / scale,
    )
    logger.info(
        f"🔬 Oracle: PSNR swap {result.psnr_swap:.3f} dB, supervised {result.psnr_sup:.3f} dB, "
        f"gap {result.psnr_gap:.4f} dB, param_dist {result.param_dist:.3e}"
    )
    return result


def noise_floor_check(
    family: OperatorFamily,
    prior: GaussianImagePrior,
    sigma: float,
    n_train: int,
    n_test: int,
    seed: int = 0,
    w: Optional[np.ndarray] = None,
) -> FloorResult:
    """
    Held-out per-element swap loss of the fitted swap estimator.

    Each term is averaged over the rows of its target measurement, so the
    expected loss of any estimator is at least 2 sigma^2.
    """
    if w is None:
        train = sample_population(family, prior, sigma, n_train, seed, "floor-train")
        w = swap_solution(family, train, q_rank_report(family.gram()).full_rank)
    test = sample_population(family, prior, sigma, n_test, seed, "floor-test")
    first, second = test.first, test.second
    f1, f2 = first.z @ w.T, second.z @ w.T
    loss = (
        np.sum((second.apply(f1) - second.y) ** 2, axis=1) / second.mask.sum(axis=1)
        + np.sum((first.apply(f2) - first.y) ** 2, axis=1) / first.mask.sum(axis=1)
    )
    result = FloorResult(loss=float(loss.mean()), se=float(loss.std(ddof=1) / np.sqrt(len(loss))), sigma=sigma)
    status = "✅" if result.passed else "❌"
    logger.info(
        f"{status} Noise floor: swap loss {result.loss:.6e} vs 2 sigma^2 = {result.floor:.6e} "
        f"(se {result.se:.2e}, excess {result.excess:+.2e})"
    )
    return result
