"""
Latent image sources.

Synthetic images are piecewise constant: a flat background with overlapping
rectangles and ellipses of random intensity. Directory sources read PGM/PPM
files and center-crop them to the configured size.
"""
import logging
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from ...shared.imageio import center_crop, list_images, read_image
from ...shared.rng import stream

logger = logging.getLogger(__name__)


def piecewise_constant_image(size: int, rng: np.random.Generator, min_shapes: int = 3, max_shapes: int = 8) -> np.ndarray:
    """size x size image in [0, 1]"""
    image = np.full((size, size), rng.uniform(0.0, 1.0))
    rows, cols = np.mgrid[0:size, 0:size]
    for _ in range(int(rng.integers(min_shapes, max_shapes + 1))):
        value = rng.uniform(0.0, 1.0)
        cy, cx = rng.uniform(0, size, 2)
        ry, rx = rng.uniform(size / 10.0, size / 2.5, 2)
        if rng.random() < 0.5:
            mask = (np.abs(rows - cy) <= ry) & (np.abs(cols - cx) <= rx)
        else:
            mask = ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2 <= 1.0
        image[mask] = value
    return image


class SyntheticImages(Sequence[np.ndarray]):
    """Lazily generated piecewise-constant images; image i depends only on (seed, i)"""

    def __init__(self, count: int, size: int, seed: int, purpose: str = "images"):
        self.count = count
        self.size = size
        self.seed = seed
        self.purpose = purpose

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(self.count))]
        if not -self.count <= index < self.count:
            raise IndexError(index)
        index %= self.count
        return piecewise_constant_image(self.size, stream(self.seed, self.purpose, index))


def load_directory_images(directory: Union[str, Path], size: int, limit: int) -> list[np.ndarray]:
    """First `limit` images of a directory, grayscale, center-cropped to size x size"""
    files = list_images(directory)[:limit]
    images = [center_crop(read_image(path), size) for path in files]
    logger.info(f"Loaded {len(images)} images from {directory}")
    return images
