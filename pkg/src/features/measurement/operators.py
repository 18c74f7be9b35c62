"""
Linear measurement operators and the additive noise model.

    y = theta x + eps,   eps ~ N(0, sigma^2) i.i.d.

Every operator maps images of shape (..., H, W) to measurements of shape
(..., *measurement_shape) and provides the exact adjoint, a differentiable
forward on Tensors, and a dense matrix at small sizes.
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np
import scipy.linalg

from ...shared.config import settings
from ...shared.constants import KERNEL_SUM_TOL, ORTHONORMAL_TOL
from ...shared.exceptions import MeasurementError, ShapeMismatchError, SizeLimitError
from ...shared.rng import stream
from ..tensor_core import Tensor, apply_linear, conv2d, getitem, reshape

logger = logging.getLogger(__name__)

Boundary = Literal["zero", "circular"]
SeedLike = Union[int, np.random.Generator]


def _orthonormal_tolerance(dtype: np.dtype) -> float:
    return max(ORTHONORMAL_TOL, 50.0 * float(np.finfo(dtype).eps))


class MeasurementOp(ABC):
    """Linear operator theta from images (H, W) to measurements"""

    image_shape: tuple[int, int]

    @property
    @abstractmethod
    def measurement_shape(self) -> tuple[int, ...]:
        ...

    @abstractmethod
    def apply(self, x: np.ndarray) -> np.ndarray:
        """theta x for images of shape (..., H, W)"""

    @abstractmethod
    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """theta^T y for measurements of shape (..., *measurement_shape)"""

    @abstractmethod
    def same_parameters(self, other: "MeasurementOp") -> bool:
        ...

    @abstractmethod
    def descriptor(self) -> dict[str, np.ndarray]:
        """Arrays that reconstruct the operator (stored in dataset records)"""

    @abstractmethod
    def network_input(self, y: np.ndarray) -> np.ndarray:
        """Input of the image estimator for measurement y, shaped (n, 1, h, w)"""

    @abstractmethod
    def to_image(self, output: Tensor) -> Tensor:
        """Map the estimator output for network_input(y) to an (H, W) image"""

    @property
    def n_pixels(self) -> int:
        return self.image_shape[0] * self.image_shape[1]

    def forward_tensor(self, x: Tensor) -> Tensor:
        """Differentiable theta x"""
        return apply_linear(x, self.apply, self.adjoint, kind=type(self).__name__)

    def loss_weights(self, source: Optional["MeasurementOp"] = None) -> Optional[np.ndarray]:
        """Weights over measurement entries for residuals of predictions made from `source`"""
        return None

    def coverage_mask(self) -> np.ndarray:
        """Pixels observed by the operator"""
        return np.ones(self.image_shape, dtype=bool)

    def check_image(self, x: np.ndarray) -> None:
        if tuple(x.shape[-2:]) != tuple(self.image_shape):
            raise ShapeMismatchError(
                f"Image of shape {x.shape} incompatible with operator on images {self.image_shape}"
            )

    def check_measurement(self, y: np.ndarray) -> None:
        shape = self.measurement_shape
        if tuple(y.shape[len(y.shape) - len(shape):]) != tuple(shape) or y.ndim < len(shape):
            raise ShapeMismatchError(
                f"Measurement of shape {y.shape} incompatible with operator output {shape}"
            )

    def materialize(self) -> np.ndarray:
        """Dense (M, N) matrix in float64"""
        n = self.n_pixels
        if n > settings.max_materialize_dim:
            raise SizeLimitError(
                f"Refusing to materialize an operator on {n} pixels (limit {settings.max_materialize_dim})"
            )
        basis = np.eye(n, dtype=np.float64).reshape(n, *self.image_shape)
        columns = self.apply(basis).reshape(n, -1)
        return np.ascontiguousarray(columns.T)


class MatrixOp(MeasurementOp):
    """Explicit matrix acting on vectorized (row-major) images"""

    def __init__(self, matrix: np.ndarray, image_shape: tuple[int, int]):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != image_shape[0] * image_shape[1]:
            raise ShapeMismatchError(f"Matrix {matrix.shape} does not act on images {image_shape}")
        self.matrix = matrix
        self.image_shape = tuple(image_shape)

    @property
    def measurement_shape(self) -> tuple[int, ...]:
        return (self.matrix.shape[0],)

    def apply(self, x: np.ndarray) -> np.ndarray:
        self.check_image(x)
        return x.reshape(*x.shape[:-2], -1) @ self.matrix.T

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        self.check_measurement(y)
        return (y @ self.matrix).reshape(*y.shape[:-1], *self.image_shape)

    def same_parameters(self, other: MeasurementOp) -> bool:
        return isinstance(other, MatrixOp) and np.array_equal(self.matrix, other.matrix)

    def descriptor(self) -> dict[str, np.ndarray]:
        return {"matrix": self.matrix}

    def network_input(self, y: np.ndarray) -> np.ndarray:
        return self.adjoint(y)[None, None]

    def to_image(self, output: Tensor) -> Tensor:
        return reshape(output, self.image_shape)

    def materialize(self) -> np.ndarray:
        return self.matrix


class CompressivePatchOp(MeasurementOp):
    """
    Patch-wise compressive projection on one partition of the image.

    The partition tiles the image with non-overlapping p x p patches starting at
    `offset` (boundary remainder cropped). Every patch is measured by the same
    m x p^2 matrix phi with orthonormal rows. Measurements have shape (P, m).
    """

    def __init__(self, phi: np.ndarray, image_shape: tuple[int, int], offset: tuple[int, int] = (0, 0)):
        phi = np.asarray(phi)
        if phi.ndim != 2:
            raise MeasurementError(f"phi must be a matrix, got shape {phi.shape}")
        m, p2 = phi.shape
        p = int(round(np.sqrt(p2)))
        if p * p != p2:
            raise MeasurementError(f"phi has {p2} columns, not a square patch size")
        if m > p2:
            raise MeasurementError(f"phi has more rows ({m}) than patch pixels ({p2})")
        gram_error = np.max(np.abs(phi @ phi.T - np.eye(m)))
        if gram_error > _orthonormal_tolerance(phi.dtype):
            raise MeasurementError(f"phi rows are not orthonormal (max deviation {gram_error:.2e})")
        dy, dx = (int(offset[0]), int(offset[1]))
        if not (0 <= dy < p and 0 <= dx < p):
            raise MeasurementError(f"Partition offset {offset} outside [0, {p})^2")
        h, w = (int(image_shape[0]), int(image_shape[1]))
        rows, cols = (h - dy) // p, (w - dx) // p
        if rows < 1 or cols < 1:
            raise MeasurementError(f"Image {h}x{w} holds no {p}x{p} patch at offset {offset}")

        self.phi = phi
        self.patch_size = p
        self.offset = (dy, dx)
        self.image_shape = (h, w)
        self.grid = (rows, cols)

    @property
    def n_measurements(self) -> int:
        return self.phi.shape[0]

    @property
    def n_patches(self) -> int:
        return self.grid[0] * self.grid[1]

    @property
    def measurement_shape(self) -> tuple[int, ...]:
        return (self.n_patches, self.n_measurements)

    def _phi_for(self, array: np.ndarray) -> np.ndarray:
        if array.dtype == np.float32:
            return self.phi.astype(np.float32, copy=False)
        return self.phi

    def extract_patches(self, x: np.ndarray) -> np.ndarray:
        """(..., H, W) -> (..., P, p, p) in row-major patch order"""
        self.check_image(x)
        p, (dy, dx), (rows, cols) = self.patch_size, self.offset, self.grid
        region = x[..., dy : dy + rows * p, dx : dx + cols * p]
        lead = region.shape[:-2]
        blocks = np.moveaxis(region.reshape(*lead, rows, p, cols, p), -3, -2)
        return blocks.reshape(*lead, rows * cols, p, p)

    def place_patches(self, patches: np.ndarray) -> np.ndarray:
        """(..., P, p, p) -> (..., H, W), zero outside the partition"""
        p, (dy, dx), (rows, cols) = self.patch_size, self.offset, self.grid
        if tuple(patches.shape[-3:]) != (rows * cols, p, p):
            raise ShapeMismatchError(f"Patches of shape {patches.shape} do not fit partition {self.grid}x{p}")
        lead = patches.shape[:-3]
        blocks = np.moveaxis(patches.reshape(*lead, rows, cols, p, p), -2, -3)
        canvas = np.zeros(lead + self.image_shape, dtype=patches.dtype)
        canvas[..., dy : dy + rows * p, dx : dx + cols * p] = blocks.reshape(*lead, rows * p, cols * p)
        return canvas

    def apply(self, x: np.ndarray) -> np.ndarray:
        patches = self.extract_patches(x)
        flat = patches.reshape(*patches.shape[:-2], -1)
        return flat @ self._phi_for(x).T

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        self.check_measurement(y)
        p = self.patch_size
        patches = (y @ self._phi_for(y)).reshape(*y.shape[:-1], p, p)
        return self.place_patches(patches)

    def coverage_mask(self) -> np.ndarray:
        return self.place_patches(np.ones((self.n_patches, self.patch_size, self.patch_size))) > 0

    def loss_weights(self, source: Optional[MeasurementOp] = None) -> Optional[np.ndarray]:
        """Keep only patches lying entirely inside the source prediction's coverage"""
        if source is None:
            return None
        covered = self.extract_patches(source.coverage_mask().astype(np.float64))
        valid = covered.reshape(self.n_patches, -1).min(axis=1) > 0
        return np.broadcast_to(valid[:, None], self.measurement_shape).astype(np.float64)

    def same_parameters(self, other: MeasurementOp) -> bool:
        return (
            isinstance(other, CompressivePatchOp)
            and self.offset == other.offset
            and self.image_shape == other.image_shape
            and np.array_equal(self.phi, other.phi)
        )

    def descriptor(self) -> dict[str, np.ndarray]:
        return {"offset": np.asarray(self.offset, dtype=np.float64)}

    def network_input(self, y: np.ndarray) -> np.ndarray:
        """theta^T y reshaped per patch: (P, 1, p, p)"""
        self.check_measurement(y)
        p = self.patch_size
        return (y @ self._phi_for(y)).reshape(self.n_patches, 1, p, p)

    def to_image(self, output: Tensor) -> Tensor:
        """Assemble per-patch predictions (P, 1, p, p) into the image canvas"""
        return apply_linear(
            output,
            lambda a: self.place_patches(a[:, 0]),
            lambda g: self.extract_patches(g)[:, None],
            kind="assemble_patches",
        )

    def __repr__(self) -> str:
        return f"CompressivePatchOp(m={self.n_measurements}, p={self.patch_size}, offset={self.offset})"


class ConvolutionOp(MeasurementOp):
    """
    Blur by true convolution with an odd-sized kernel (nonnegative, sum 1).

    zero boundary: output has the image size, outside pixels read as 0.
    circular boundary: periodic wrap-around.
    """

    def __init__(
        self,
        kernel: np.ndarray,
        image_shape: tuple[int, int],
        boundary: Boundary = "zero",
        kernel_tensor: Optional[Tensor] = None,
    ):
        kernel = np.asarray(kernel, dtype=np.float64)
        if kernel.ndim != 2 or kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
            raise MeasurementError(f"Blur kernel must be 2-D with odd sides, got shape {kernel.shape}")
        if kernel.min() < -KERNEL_SUM_TOL:
            raise MeasurementError(f"Blur kernel has negative entries (min {kernel.min():.2e})")
        if abs(kernel.sum() - 1.0) > KERNEL_SUM_TOL:
            raise MeasurementError(f"Blur kernel sums to {kernel.sum():.8f}, expected 1")
        if kernel.shape[0] > image_shape[0] or kernel.shape[1] > image_shape[1]:
            raise MeasurementError(f"Kernel {kernel.shape} larger than image {tuple(image_shape)}")
        if boundary not in ("zero", "circular"):
            raise MeasurementError(f"Unknown boundary {boundary!r}")
        if kernel_tensor is not None and kernel_tensor.shape != kernel.shape:
            raise ShapeMismatchError(f"Kernel tensor {kernel_tensor.shape} differs from kernel {kernel.shape}")
        self.kernel = np.clip(kernel, 0.0, None)
        self.image_shape = (int(image_shape[0]), int(image_shape[1]))
        self.boundary = boundary
        self.kernel_tensor = kernel_tensor
        self.radius = (kernel.shape[0] // 2, kernel.shape[1] // 2)

    @property
    def kernel_size(self) -> int:
        return self.kernel.shape[0]

    @property
    def measurement_shape(self) -> tuple[int, ...]:
        return self.image_shape

    def _taps(self):
        kh, kw = self.kernel.shape
        for a in range(kh):
            for b in range(kw):
                weight = self.kernel[a, b]
                if weight != 0.0:
                    yield a, b, weight

    def _pad(self, x: np.ndarray) -> np.ndarray:
        ry, rx = self.radius
        return np.pad(x, [(0, 0)] * (x.ndim - 2) + [(ry, ry), (rx, rx)])

    def apply(self, x: np.ndarray) -> np.ndarray:
        self.check_image(x)
        (ry, rx), (h, w) = self.radius, self.image_shape
        out = np.zeros_like(x)
        if self.boundary == "circular":
            for a, b, weight in self._taps():
                out += weight * np.roll(x, shift=(a - ry, b - rx), axis=(-2, -1))
            return out
        xp = self._pad(x)
        for a, b, weight in self._taps():
            out += weight * xp[..., 2 * ry - a : 2 * ry - a + h, 2 * rx - b : 2 * rx - b + w]
        return out

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        self.check_measurement(y)
        (ry, rx), (h, w) = self.radius, self.image_shape
        out = np.zeros_like(y)
        if self.boundary == "circular":
            for a, b, weight in self._taps():
                out += weight * np.roll(y, shift=(ry - a, rx - b), axis=(-2, -1))
            return out
        yp = self._pad(y)
        for a, b, weight in self._taps():
            out += weight * yp[..., a : a + h, b : b + w]
        return out

    def forward_tensor(self, x: Tensor) -> Tensor:
        """Differentiable blur; routes through the live kernel tensor when one is attached"""
        if self.boundary == "circular":
            return super().forward_tensor(x)
        lead = x.shape[:-2]
        images = reshape(x, (-1, 1) + self.image_shape)
        if self.kernel_tensor is not None:
            flipped = getitem(self.kernel_tensor, (slice(None, None, -1), slice(None, None, -1)))
            weights = reshape(flipped, (1, 1) + self.kernel.shape)
        else:
            weights = Tensor(self.kernel[::-1, ::-1].reshape(1, 1, *self.kernel.shape).astype(x.dtype))
        blurred = conv2d(images, weights, stride=1, padding="same")
        return reshape(blurred, lead + self.image_shape)

    def loss_weights(self, source: Optional[MeasurementOp] = None) -> Optional[np.ndarray]:
        """Interior pixels only (margin = kernel radius) under zero boundary"""
        if self.boundary == "circular":
            return None
        (ry, rx), (h, w) = self.radius, self.image_shape
        mask = np.zeros(self.image_shape, dtype=np.float64)
        mask[ry : h - ry, rx : w - rx] = 1.0
        return mask

    def same_parameters(self, other: MeasurementOp) -> bool:
        return (
            isinstance(other, ConvolutionOp)
            and self.kernel.shape == other.kernel.shape
            and np.array_equal(self.kernel, other.kernel)
        )

    def descriptor(self) -> dict[str, np.ndarray]:
        return {"kernel": self.kernel}

    def network_input(self, y: np.ndarray) -> np.ndarray:
        self.check_measurement(y)
        return y.reshape(1, 1, *self.image_shape)

    def to_image(self, output: Tensor) -> Tensor:
        return reshape(output, self.image_shape)

    def __repr__(self) -> str:
        return f"ConvolutionOp(kernel={self.kernel.shape}, boundary={self.boundary})"


@dataclass(frozen=True)
class GaussianNoise:
    """i.i.d. zero-mean Gaussian noise in [0, 1] intensity units"""

    sigma: float = 0.0

    def __post_init__(self):
        if not self.sigma >= 0.0:
            raise MeasurementError(f"Noise sigma must be >= 0, got {self.sigma}")

    def sample(self, shape: tuple[int, ...], rng: np.random.Generator, dtype=np.float64) -> np.ndarray:
        if self.sigma == 0.0:
            return np.zeros(shape, dtype=dtype)
        return rng.normal(0.0, self.sigma, size=shape).astype(dtype)


def _generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(int(seed))


def measure(theta: MeasurementOp, x: Union[Tensor, np.ndarray], noise: GaussianNoise, seed: SeedLike) -> Tensor:
    """theta x + eps with seeded noise"""
    image = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    clean = theta.apply(image)
    return Tensor(clean + noise.sample(clean.shape, _generator(seed), dtype=clean.dtype))


def adjoint_input(theta: MeasurementOp, y: Union[Tensor, np.ndarray]) -> Tensor:
    """theta^T y in image geometry"""
    values = y.data if isinstance(y, Tensor) else np.asarray(y, dtype=np.float64)
    return Tensor(theta.adjoint(values))


def orthonormal_rows(m: int, n: int, seed: int) -> np.ndarray:
    """m x n matrix with orthonormal rows, from QR of a seeded Gaussian matrix"""
    if not 1 <= m <= n:
        raise MeasurementError(f"Need 1 <= m <= n for orthonormal rows, got m={m}, n={n}")
    gaussian = stream(seed, "phi", m, n).normal(size=(n, m))
    q, r = scipy.linalg.qr(gaussian, mode="economic")
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return np.ascontiguousarray((q * signs).T)
