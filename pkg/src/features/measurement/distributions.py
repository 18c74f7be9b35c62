"""
Parameter distributions p_theta.

cs-shifted-partitions: a fixed orthonormal phi on p x p patches, offset uniform
over [0, p)^2. motion-kernels: random-walk kernels of size K x K.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np

from ...shared.constants import FAMILIES, FAMILY_BLUR, FAMILY_CS
from ...shared.entities import FamilyName
from ...shared.exceptions import MeasurementError
from .kernels import random_walk_kernel
from .operators import Boundary, CompressivePatchOp, ConvolutionOp, MeasurementOp
from .partitions import all_offsets, check_partition_geometry, sample_offset_pair

logger = logging.getLogger(__name__)

MAX_PAIR_ATTEMPTS = 1000


@dataclass
class ParamDistribution:
    """Seeded sampler of measurement operators for one family"""

    family: FamilyName
    image_shape: tuple[int, int]
    seed: int = 0
    phi: Optional[np.ndarray] = None
    kernel_size: int = 5
    max_walk_length: int = 4
    max_turn: float = 0.8
    boundary: Boundary = "zero"
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.image_shape = (int(self.image_shape[0]), int(self.image_shape[1]))
        if self.family not in FAMILIES:
            raise MeasurementError(f"Unknown operator family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if self.family == FAMILY_CS:
            if self.phi is None:
                raise MeasurementError("cs-shifted-partitions needs a measurement matrix phi")
            self.phi = np.asarray(self.phi)
            check_partition_geometry(self.image_shape, self.patch_size)
        else:
            if self.kernel_size < 3 or self.kernel_size % 2 == 0:
                raise MeasurementError(f"Motion kernels need an odd size >= 3, got {self.kernel_size}")
            if self.kernel_size > min(self.image_shape):
                raise MeasurementError(f"Kernel size {self.kernel_size} exceeds image {self.image_shape}")
        self.rng = np.random.default_rng(self.seed)

    @classmethod
    def compressive(cls, phi: np.ndarray, image_shape: tuple[int, int], seed: int = 0) -> "ParamDistribution":
        return cls(family=FAMILY_CS, image_shape=image_shape, seed=seed, phi=phi)

    @classmethod
    def motion(
        cls,
        kernel_size: int,
        image_shape: tuple[int, int],
        seed: int = 0,
        max_walk_length: Optional[int] = None,
        max_turn: float = 0.8,
        boundary: Boundary = "zero",
    ) -> "ParamDistribution":
        return cls(
            family=FAMILY_BLUR,
            image_shape=image_shape,
            seed=seed,
            kernel_size=kernel_size,
            max_walk_length=kernel_size - 1 if max_walk_length is None else max_walk_length,
            max_turn=max_turn,
            boundary=boundary,
        )

    @property
    def patch_size(self) -> int:
        return int(round(np.sqrt(self.phi.shape[1])))

    @property
    def is_compressive(self) -> bool:
        return self.family == FAMILY_CS

    def _rng(self, rng: Optional[np.random.Generator]) -> np.random.Generator:
        return self.rng if rng is None else rng

    def kernel_op(self, kernel: np.ndarray) -> ConvolutionOp:
        return ConvolutionOp(kernel, self.image_shape, boundary=self.boundary)

    def partition_op(self, offset: tuple[int, int]) -> CompressivePatchOp:
        return CompressivePatchOp(self.phi, self.image_shape, offset)

    def sample(self, rng: Optional[np.random.Generator] = None) -> MeasurementOp:
        """One operator; uses the internal stream unless rng is given"""
        rng = self._rng(rng)
        if self.is_compressive:
            offsets = all_offsets(self.patch_size)
            return self.partition_op(offsets[int(rng.integers(len(offsets)))])
        kernel = random_walk_kernel(self.kernel_size, self.max_walk_length, self.max_turn, rng)
        return self.kernel_op(kernel)

    def sample_pair(self, rng: Optional[np.random.Generator] = None) -> tuple[MeasurementOp, MeasurementOp]:
        """Two operators with different parameters"""
        rng = self._rng(rng)
        if self.is_compressive:
            first, second = sample_offset_pair(self.image_shape, self.patch_size, rng)
            return self.partition_op(first), self.partition_op(second)
        first = self.sample(rng)
        for _ in range(MAX_PAIR_ATTEMPTS):
            second = self.sample(rng)
            if not first.same_parameters(second):
                return first, second
        raise MeasurementError("Could not draw two distinct kernels; widen the walk length bound")

    def support(self) -> Optional[list[MeasurementOp]]:
        """Every operator of a finite family (None for continuous families)"""
        if self.is_compressive:
            return [self.partition_op(offset) for offset in all_offsets(self.patch_size)]
        return None

    def from_descriptor(self, descriptor: dict[str, np.ndarray]) -> MeasurementOp:
        """Rebuild an operator from stored record arrays"""
        if self.is_compressive:
            offset = descriptor.get("offset")
            if offset is None:
                raise MeasurementError("Record has no partition offset")
            return self.partition_op((int(round(offset[0])), int(round(offset[1]))))
        kernel = descriptor.get("kernel")
        if kernel is None:
            raise MeasurementError("Record has no blur kernel")
        kernel = np.asarray(kernel, dtype=np.float64)
        return self.kernel_op(kernel / kernel.sum())

    def to_manifest(self) -> dict[str, Any]:
        info: dict[str, Any] = {"family": self.family, "image_shape": list(self.image_shape), "seed": self.seed}
        if self.is_compressive:
            info.update(patch_size=self.patch_size, measurements=int(self.phi.shape[0]))
        else:
            info.update(
                kernel_size=self.kernel_size,
                max_walk_length=self.max_walk_length,
                max_turn=self.max_turn,
                boundary=self.boundary,
            )
        return info

    @classmethod
    def from_manifest(cls, info: dict[str, Any], phi: Optional[np.ndarray] = None) -> "ParamDistribution":
        shape = tuple(info["image_shape"])
        if info["family"] == FAMILY_CS:
            return cls.compressive(phi, shape, seed=int(info.get("seed", 0)))
        return cls.motion(
            int(info["kernel_size"]),
            shape,
            seed=int(info.get("seed", 0)),
            max_walk_length=int(info["max_walk_length"]),
            max_turn=float(info["max_turn"]),
            boundary=info.get("boundary", "zero"),
        )


def sample_motion_kernel(dist: ParamDistribution, seed: Union[int, np.random.Generator]) -> ConvolutionOp:
    """Seeded random-walk blur operator from a motion-kernel distribution"""
    if dist.family != FAMILY_BLUR:
        raise MeasurementError(f"sample_motion_kernel needs a motion-kernel distribution, got {dist.family}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(int(seed))
    return dist.sample(rng)
