"""
Expected Gram matrix Q = E[theta^T theta] and its rank diagnostics.

Q is full rank exactly when the operator ensemble observes every image
direction; training on pairs can then recover the image up to the noise floor.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, eigsh

from ...shared.config import settings
from ...shared.constants import RANK_THRESHOLD, SYMMETRY_TOL
from ...shared.exceptions import MeasurementError, SizeLimitError
from .operators import MeasurementOp

logger = logging.getLogger(__name__)


class OperatorSampler(Protocol):
    image_shape: tuple[int, int]

    def sample(self, rng: Optional[np.random.Generator] = None) -> MeasurementOp:
        ...

    def support(self) -> Optional[list[MeasurementOp]]:
        ...


@dataclass
class QRankReport:
    rank: int
    eigenvalues: np.ndarray
    full_rank: bool
    threshold: float

    @property
    def null_dim(self) -> int:
        return len(self.eigenvalues) - self.rank

    @property
    def condition(self) -> float:
        smallest = self.eigenvalues[-1]
        return float("inf") if smallest <= 0 else float(self.eigenvalues[0] / smallest)


def _check_dims(image_shape: tuple[int, int]) -> int:
    n = int(image_shape[0]) * int(image_shape[1])
    if n > settings.max_materialize_dim:
        raise SizeLimitError(
            f"Q on {image_shape[0]}x{image_shape[1]} images has {n} rows "
            f"(limit {settings.max_materialize_dim}); use smallest_eigenvalue instead"
        )
    return n


def gram_of_operators(ops: Sequence[MeasurementOp]) -> np.ndarray:
    """(1/n) sum theta_i^T theta_i, symmetrized"""
    if not ops:
        raise MeasurementError("gram_of_operators needs at least one operator")
    n = _check_dims(ops[0].image_shape)
    q = np.zeros((n, n), dtype=np.float64)
    for op in ops:
        matrix = op.materialize()
        q += matrix.T @ matrix
    q /= len(ops)
    return (q + q.T) / 2.0


def gram_expectation(
    dist: OperatorSampler,
    n_samples: int,
    image_dims: Optional[tuple[int, int]] = None,
    seed: Optional[int] = None,
    exhaustive: bool = False,
) -> np.ndarray:
    """
    Monte-Carlo (or exhaustive, for finite families) estimate of E[theta^T theta].

    image_dims, when given, must agree with the distribution's image shape.
    """
    image_dims = tuple(dist.image_shape) if image_dims is None else tuple(image_dims)
    if image_dims != tuple(dist.image_shape):
        raise MeasurementError(f"image_dims {image_dims} differ from the distribution's {dist.image_shape}")
    _check_dims(image_dims)
    support = dist.support() if exhaustive else None
    if exhaustive and support is None:
        raise MeasurementError("exhaustive Q needs a finite operator family")
    if support is not None:
        ops = support
    else:
        rng = None if seed is None else np.random.default_rng(seed)
        ops = [dist.sample(rng) for _ in range(n_samples)]
    logger.debug(f"Q from {len(ops)} operators on {image_dims}")
    return gram_of_operators(ops)


def q_rank_report(
    q: np.ndarray, threshold: float = RANK_THRESHOLD, region: Optional[np.ndarray] = None
) -> QRankReport:
    """Eigen-spectrum (descending) and numerical rank at threshold * lambda_max"""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise MeasurementError(f"Q must be square, got shape {q.shape}")
    asymmetry = float(np.max(np.abs(q - q.T))) if q.size else 0.0
    if asymmetry > SYMMETRY_TOL:
        raise MeasurementError(f"Q is not symmetric (max asymmetry {asymmetry:.2e})")
    if region is not None:
        keep = np.asarray(region, dtype=bool).reshape(-1)
        if keep.size != q.shape[0]:
            raise MeasurementError(f"Region mask of {keep.size} pixels does not match Q of size {q.shape[0]}")
        q = q[np.ix_(keep, keep)]
    eigenvalues = scipy.linalg.eigvalsh(q)[::-1]
    top = float(eigenvalues[0]) if eigenvalues.size else 0.0
    rank = int(np.sum(eigenvalues > threshold * top)) if top > 0 else 0
    return QRankReport(rank=rank, eigenvalues=eigenvalues, full_rank=rank == q.shape[0], threshold=threshold)


def extreme_eigenvalues(dist: OperatorSampler, n_samples: int, seed: int = 0) -> tuple[float, float]:
    """(lambda_min, lambda_max) of Q without materializing it"""
    h, w = dist.image_shape
    rng = np.random.default_rng(seed)
    ops = dist.support() or [dist.sample(rng) for _ in range(n_samples)]

    def matvec(v: np.ndarray) -> np.ndarray:
        image = np.asarray(v, dtype=np.float64).reshape(h, w)
        total = np.zeros_like(image)
        for op in ops:
            total += op.adjoint(op.apply(image))
        return (total / len(ops)).reshape(-1)

    operator = LinearOperator((h * w, h * w), matvec=matvec, rmatvec=matvec, dtype=np.float64)
    start = np.ones(h * w)
    smallest = eigsh(operator, k=1, which="SA", return_eigenvectors=False, v0=start)
    largest = eigsh(operator, k=1, which="LA", return_eigenvectors=False, v0=start)
    return float(smallest[0]), float(largest[0])


def smallest_eigenvalue(dist: OperatorSampler, n_samples: int, seed: int = 0) -> float:
    """lambda_min of Q without materializing it"""
    return extreme_eigenvalues(dist, n_samples, seed)[0]
