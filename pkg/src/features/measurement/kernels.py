"""
Random motion-blur kernels.

A kernel is the rasterized trajectory of a random 2-D walk: the walk length is
uniform in {0..max_length}, each unit step turns by at most `max_turn` radians,
and the path is splatted bilinearly at half-pixel spacing so the support stays
connected. A zero-length walk is a centered delta. A walk of length size - 1
always fits; longer walks are shrunk to the kernel window.
"""
import logging
from typing import Optional, Sequence

import numpy as np

from ...shared.exceptions import MeasurementError

logger = logging.getLogger(__name__)

SUBSTEPS = 2


def random_walk_kernel(size: int, max_length: int, max_turn: float, rng: np.random.Generator) -> np.ndarray:
    """size x size nonnegative kernel summing to 1"""
    if size < 1 or size % 2 == 0:
        raise MeasurementError(f"Kernel size must be odd and positive, got {size}")
    if max_length < 0:
        raise MeasurementError(f"Walk length bound must be >= 0, got {max_length}")

    length = int(rng.integers(0, max_length + 1))
    angle = rng.uniform(0.0, 2.0 * np.pi)
    points = [np.zeros(2)]
    position = np.zeros(2)
    for _ in range(length):
        angle += rng.uniform(-max_turn, max_turn)
        step = np.array([np.sin(angle), np.cos(angle)]) / SUBSTEPS
        for _ in range(SUBSTEPS):
            position = position + step
            points.append(position.copy())
    trajectory = np.asarray(points)

    half = (size - 1) / 2.0
    trajectory -= (trajectory.min(axis=0) + trajectory.max(axis=0)) / 2.0
    # walks longer than size - 1 are shrunk to fit, not clipped onto the border
    extent = float(np.abs(trajectory).max()) if len(trajectory) > 1 else 0.0
    if extent > half:
        trajectory *= half / extent
    coords = np.clip(trajectory, -half, half) + half

    kernel = np.zeros((size, size), dtype=np.float64)
    base = np.floor(coords).astype(int)
    frac = coords - base
    for dy in (0, 1):
        for dx in (0, 1):
            weight = (frac[:, 0] if dy else 1.0 - frac[:, 0]) * (frac[:, 1] if dx else 1.0 - frac[:, 1])
            rows = np.minimum(base[:, 0] + dy, size - 1)
            cols = np.minimum(base[:, 1] + dx, size - 1)
            np.add.at(kernel, (rows, cols), weight)
    return kernel / kernel.sum()


def kernel_spectrum(kernels: Sequence[np.ndarray], shape: Optional[tuple[int, int]] = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Fourier magnitudes of kernels zero-padded to a common shape.

    Returns (per-kernel magnitudes (n, H, W), mean magnitude (H, W)).
    """
    if len(kernels) == 0:
        raise MeasurementError("kernel_spectrum needs at least one kernel")
    arrays = [np.asarray(k, dtype=np.float64) for k in kernels]
    if shape is None:
        shape = (max(a.shape[0] for a in arrays), max(a.shape[1] for a in arrays))
    magnitudes = np.empty((len(arrays),) + tuple(shape))
    for idx, kernel in enumerate(arrays):
        if kernel.shape[0] > shape[0] or kernel.shape[1] > shape[1]:
            raise MeasurementError(f"Kernel {kernel.shape} does not fit spectrum shape {tuple(shape)}")
        magnitudes[idx] = np.abs(np.fft.fft2(kernel, s=shape))
    return magnitudes, magnitudes.mean(axis=0)
