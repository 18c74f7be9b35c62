"""Test utilities and helpers"""
from typing import Any, Dict, Optional

import numpy as np

from src.features.measurement import GaussianNoise, PairDataset, ParamDistribution, build_pair_dataset, orthonormal_rows
from src.features.measurement.synthetic import SyntheticImages
from src.features.models import ImageEstimator, ParamEstimator
from src.shared.entities import LossKind, LossWeights, TrainConfig


def create_train_config(regime: str = "unsup-nonblind", **kwargs) -> TrainConfig:
    """Small, fast training configuration"""
    defaults: Dict[str, Any] = {
        "regime": regime,
        "weights": LossWeights(gamma=0.05),
        "rho": LossKind.L2,
        "batch_size": 4,
        "max_epochs": 2,
        "val_fraction": 0.25,
        "seed": 0,
    }
    defaults.update(kwargs)
    return TrainConfig(**defaults)


def write_config(path, **sections: Dict[str, Any]) -> str:
    """Write a sectioned key = value config file; returns its path"""
    lines = []
    for section, values in sections.items():
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {value}" for key, value in values.items())
        lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")
    return str(path)


class TestDataFactory:
    """Factory for creating test data"""

    __test__ = False

    @staticmethod
    def cs_distribution(image_size: int = 12, patch_size: int = 4, measurements: int = 4, seed: int = 0) -> ParamDistribution:
        phi = orthonormal_rows(measurements, patch_size * patch_size, seed=seed)
        return ParamDistribution.compressive(phi, (image_size, image_size), seed=seed)

    @staticmethod
    def blur_distribution(image_size: int = 16, kernel_size: int = 3, seed: int = 0) -> ParamDistribution:
        return ParamDistribution.motion(kernel_size, (image_size, image_size), seed=seed)

    @staticmethod
    def images(count: int, size: int, seed: int = 0) -> list[np.ndarray]:
        return [np.asarray(image) for image in SyntheticImages(count, size, seed, purpose="test-images")]

    @staticmethod
    def pair_dataset(
        dist: ParamDistribution,
        count: int = 8,
        sigma: float = 0.0,
        seed: int = 0,
        keep_ground_truth: bool = True,
        blind: bool = False,
    ) -> PairDataset:
        """In-memory paired dataset; blind datasets drop the operators"""
        noise = GaussianNoise(sigma)
        images = TestDataFactory.images(count, dist.image_shape[0], seed)
        pairs = build_pair_dataset(images, dist, noise, seed=seed, keep_ground_truth=keep_ground_truth)
        if blind:
            pairs = [p.without_parameters() for p in pairs]
        return PairDataset(dist=dist, noise=noise, pairs=pairs, seed=seed, blind=blind)

    @staticmethod
    def cs_estimator(patch_size: int = 4, seed: int = 0, dtype=np.float32) -> ImageEstimator:
        return ImageEstimator("cs", patch_size, widths=(4, 8), seed=seed, dtype=dtype)

    @staticmethod
    def deblur_estimators(
        image_size: int = 16, kernel_size: Optional[int] = 3, seed: int = 0, share_encoder: bool = False
    ) -> tuple[ImageEstimator, Optional[ParamEstimator]]:
        f = ImageEstimator("deblur", image_size, widths=(4, 8, 8), seed=seed)
        g = None if kernel_size is None else ParamEstimator(f, kernel_size, seed=seed + 1, share_encoder=share_encoder)
        return f, g
