"""Shifted patch partitions for paired compressive measurements"""
import logging

import numpy as np

from ...shared.exceptions import MeasurementError
from ...shared.rng import stream

logger = logging.getLogger(__name__)


def all_offsets(p: int) -> list[tuple[int, int]]:
    """Every partition offset in [0, p)^2, row-major"""
    return [(dy, dx) for dy in range(p) for dx in range(p)]


def partition_grid(image_shape: tuple[int, int], p: int, offset: tuple[int, int]) -> tuple[int, int]:
    """Rows and columns of complete p x p patches starting at offset"""
    h, w = image_shape
    return (h - offset[0]) // p, (w - offset[1]) // p


def check_partition_geometry(image_shape: tuple[int, int], p: int) -> None:
    h, w = image_shape
    if p < 2:
        raise MeasurementError(f"Patch size {p} admits a single partition offset; need p >= 2")
    if h < 2 * p or w < 2 * p:
        raise MeasurementError(f"Image {h}x{w} too small for two shifted {p}x{p} partitions (need >= {2 * p})")


def sample_offset_pair(image_shape: tuple[int, int], p: int, rng: np.random.Generator) -> tuple[tuple[int, int], tuple[int, int]]:
    """Two distinct offsets drawn uniformly from [0, p)^2"""
    check_partition_geometry(image_shape, p)
    offsets = all_offsets(p)
    first = int(rng.integers(len(offsets)))
    second = int(rng.integers(len(offsets) - 1))
    if second >= first:
        second += 1
    return offsets[first], offsets[second]


def shifted_partitions(image_shape: tuple[int, int], p: int, seed: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Seeded pair of distinct partition offsets for one image"""
    return sample_offset_pair(image_shape, p, stream(seed, "partitions"))
