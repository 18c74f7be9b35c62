"""
Small explicit operator families and a Gaussian image prior.

Everything here is dense: families are stacks of explicit matrices on N = s*s
pixels so expectations over theta can be taken exactly.
"""
import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg

from ...shared.exceptions import MeasurementError, SizeLimitError
from ...shared.rng import derive_seed
from ..measurement.gram import gram_of_operators
from ..measurement.operators import CompressivePatchOp, MatrixOp, orthonormal_rows
from ..measurement.partitions import all_offsets, check_partition_geometry

logger = logging.getLogger(__name__)

FamilyKind = Literal["cs", "orthogonal", "fixed"]
MAX_THEORY_PIXELS = 256
PRIOR_JITTER = 1e-8


@dataclass
class OperatorFamily:
    """Uniform distribution over a finite list of explicit operators"""

    kind: str
    image_size: int
    ops: list[MatrixOp]
    padded: np.ndarray = field(init=False, repr=False)
    row_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.ops:
            raise MeasurementError("An operator family needs at least one operator")
        if self.n_pixels > MAX_THEORY_PIXELS:
            raise SizeLimitError(f"Theory checks are limited to {MAX_THEORY_PIXELS} pixels, got {self.n_pixels}")
        rows = max(op.matrix.shape[0] for op in self.ops)
        self.padded = np.zeros((len(self.ops), rows, self.n_pixels))
        self.row_mask = np.zeros((len(self.ops), rows))
        for k, op in enumerate(self.ops):
            m = op.matrix.shape[0]
            self.padded[k, :m] = op.matrix
            self.row_mask[k, :m] = 1.0

    @property
    def n_pixels(self) -> int:
        return self.image_size * self.image_size

    @property
    def image_shape(self) -> tuple[int, int]:
        return (self.image_size, self.image_size)

    def __len__(self) -> int:
        return len(self.ops)

    def gram(self) -> np.ndarray:
        """Q = E[theta^T theta], exact over the family"""
        return gram_of_operators(self.ops)

    def mean_rows(self) -> float:
        """E[M], the expected number of measurements"""
        return float(self.row_mask.sum(axis=1).mean())

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.integers(len(self.ops), size=count)

    # ==========================================
    # CONSTRUCTORS
    # ==========================================

    @classmethod
    def compressive(cls, image_size: int, patch_size: int, measurements: int, seed: int = 0) -> "OperatorFamily":
        """Every shifted partition of one orthonormal patch matrix"""
        check_partition_geometry((image_size, image_size), patch_size)
        phi = orthonormal_rows(measurements, patch_size * patch_size, seed)
        ops = [
            MatrixOp(CompressivePatchOp(phi, (image_size, image_size), offset).materialize(), (image_size, image_size))
            for offset in all_offsets(patch_size)
        ]
        return cls("cs", image_size, ops)

    @classmethod
    def orthogonal(cls, image_size: int, rows: int, count: int, seed: int = 0) -> "OperatorFamily":
        """`count` independent matrices with orthonormal rows"""
        n = image_size * image_size
        ops = [
            MatrixOp(orthonormal_rows(rows, n, derive_seed(seed, "orthogonal", k)), (image_size, image_size))
            for k in range(count)
        ]
        return cls("orthogonal", image_size, ops)

    @classmethod
    def fixed(cls, image_size: int, rows: int, seed: int = 0) -> "OperatorFamily":
        """A single operator; rank-deficient whenever rows < N"""
        matrix = orthonormal_rows(rows, image_size * image_size, derive_seed(seed, "fixed"))
        return cls("fixed", image_size, [MatrixOp(matrix, (image_size, image_size))])

    @classmethod
    def build(
        cls, kind: FamilyKind, image_size: int, patch_size: int, measurements: int, family_size: int, seed: int = 0
    ) -> "OperatorFamily":
        """Families matched in measurement count to the compressive one"""
        if kind == "cs":
            return cls.compressive(image_size, patch_size, measurements, seed)
        rows = measurements * (image_size // patch_size) ** 2
        if kind == "orthogonal":
            return cls.orthogonal(image_size, rows, family_size, seed)
        if kind == "fixed":
            return cls.fixed(image_size, rows, seed)
        raise MeasurementError(f"Unknown operator family {kind!r}")


class GaussianImagePrior:
    """
    x ~ N(mean, Sigma) on an s x s grid with squared-exponential correlations:
    Sigma_ij = std^2 * exp(-|p_i - p_j|^2 / (2 * bandwidth^2)).
    """

    def __init__(self, image_size: int, bandwidth: float = 1.5, mean: float = 0.5, std: float = 0.2):
        self.image_size = image_size
        self.bandwidth = bandwidth
        rows, cols = np.divmod(np.arange(image_size * image_size), image_size)
        distance2 = (rows[:, None] - rows[None, :]) ** 2 + (cols[:, None] - cols[None, :]) ** 2
        self.mean = np.full(image_size * image_size, mean)
        self.covariance = std**2 * np.exp(-distance2 / (2.0 * bandwidth**2))
        jitter = PRIOR_JITTER * np.eye(len(self.mean))
        self.factor = scipy.linalg.cholesky(self.covariance + jitter, lower=True)

    @property
    def n_pixels(self) -> int:
        return len(self.mean)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """(count, N) vectorized images"""
        return self.mean + rng.standard_normal((count, self.n_pixels)) @ self.factor.T

    def quadratic_expectation(self, q: np.ndarray) -> float:
        """E[x^T Q x] = tr(Q Sigma) + mu^T Q mu"""
        return float(np.trace(q @ self.covariance) + self.mean @ q @ self.mean)
