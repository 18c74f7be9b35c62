"""
Image file input/output.

8-bit binary PGM (P5) and PPM (P6) files map to [0, 1] intensities by /255.
Reconstructions are written back as 8-bit PGM after clamping to [0, 1].
"""
import logging
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import DatasetError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
SUPPORTED_SUFFIXES = (".pgm", ".ppm", ".pnm")


def read_image(path: PathLike, grayscale: bool = True) -> np.ndarray:
    """Read a PGM/PPM file as float64 in [0, 1]; RGB is converted to luminance"""
    path = Path(path)
    try:
        with Image.open(path) as image:
            if image.mode not in ("L", "RGB"):
                raise DatasetError(f"Unsupported image mode {image.mode} in {path}")
            if grayscale and image.mode == "RGB":
                image = image.convert("L")
            array = np.asarray(image, dtype=np.float64) / 255.0
    except (OSError, UnidentifiedImageError) as e:
        raise DatasetError(f"Unreadable image {path}: {str(e)}")
    return array


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1], scale by 255 and round"""
    return np.rint(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def write_pgm(path: PathLike, image: np.ndarray) -> None:
    """Write a single-channel image as binary PGM"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if np.asarray(image).ndim != 2:
        raise DatasetError(f"PGM output needs a 2-D image, got shape {np.shape(image)}")
    Image.fromarray(to_uint8(image)).save(path, format="PPM")


def list_images(directory: PathLike) -> list[Path]:
    """Sorted PGM/PPM files of a directory"""
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"Image directory not found: {directory}")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in SUPPORTED_SUFFIXES)
    if not files:
        raise DatasetError(f"No PGM/PPM images in {directory}")
    return files


def center_crop(image: np.ndarray, size: int) -> np.ndarray:
    """Central size x size crop"""
    h, w = image.shape[:2]
    if h < size or w < size:
        raise DatasetError(f"Image {h}x{w} smaller than crop size {size}")
    top, left = (h - size) // 2, (w - size) // 2
    return image[top : top + size, left : left + size]
