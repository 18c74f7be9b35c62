"""
Paired-measurement datasets.

Each latent image yields exactly two measurements under two distinct operators
drawn from p_theta. Measurements (noise included) are frozen at creation.

Directory layout:
    manifest.json          family, geometry, noise, seeds, record list
    phi.uim                measurement matrix (compressive family)
    records/NNNNN.uim      y1, y2 and, unless blind, theta descriptors
    sealed/NNNNN.uim       theta descriptors of blind datasets
    ground_truth/NNNNN.uim latent image, read only on request
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np

from ...shared.constants import (
    GROUND_TRUTH_DIR,
    MANIFEST_NAME,
    PHI_FILE,
    RECORDS_DIR,
    SEALED_DIR,
)
from ...shared.config import settings
from ...shared.exceptions import DatasetError, MeasurementError, PairwiseImagingError
from ...shared.rng import derive_seed, stream
from ...shared.serialization import load_tensors, save_tensors
from ..tensor_core import Tensor
from .distributions import ParamDistribution
from .operators import GaussianNoise, MeasurementOp, measure

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
DATASET_FORMAT = 1


def _frozen(value) -> Optional[Tensor]:
    if value is None:
        return None
    tensor = value if isinstance(value, Tensor) else Tensor(np.asarray(value))
    frozen = Tensor(np.array(tensor.data, copy=True))
    frozen.data.setflags(write=False)
    return frozen


@dataclass(frozen=True)
class MeasurementPair:
    """Two measurements of one latent image"""

    y1: Tensor
    y2: Tensor
    theta1: Optional[MeasurementOp] = None
    theta2: Optional[MeasurementOp] = None
    x_eval: Optional[Tensor] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "y1", _frozen(self.y1))
        object.__setattr__(self, "y2", _frozen(self.y2))
        object.__setattr__(self, "x_eval", _frozen(self.x_eval))
        if (self.theta1 is None) != (self.theta2 is None):
            raise MeasurementError("A pair carries both operators or neither")
        if self.theta1 is not None and self.theta1.same_parameters(self.theta2):
            raise MeasurementError("Operators of a pair must have different parameters")

    @property
    def has_parameters(self) -> bool:
        return self.theta1 is not None

    def without_parameters(self) -> "MeasurementPair":
        return dataclasses.replace(self, theta1=None, theta2=None)

    def without_ground_truth(self) -> "MeasurementPair":
        return dataclasses.replace(self, x_eval=None)

    def fingerprint(self) -> str:
        """sha256 of y1 and y2 as the <f4 bytes a record stores"""
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.y1.data, dtype="<f4").tobytes())
        digest.update(np.ascontiguousarray(self.y2.data, dtype="<f4").tobytes())
        return digest.hexdigest()


@dataclass
class PairDataset:
    """Pairs plus everything needed to rebuild p_theta and p_eps"""

    dist: ParamDistribution
    noise: GaussianNoise
    pairs: list[MeasurementPair]
    seed: int = 0
    blind: bool = False
    metadata: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def family(self) -> str:
        return self.dist.family

    @property
    def image_shape(self) -> tuple[int, int]:
        return self.dist.image_shape

    @property
    def has_ground_truth(self) -> bool:
        return bool(self.pairs) and all(p.x_eval is not None for p in self.pairs)

    def fingerprint(self) -> str:
        """Hash over every measurement tensor, in order"""
        digest = hashlib.sha256()
        for pair in self.pairs:
            digest.update(pair.fingerprint().encode("ascii"))
        return digest.hexdigest()


def _make_pair(
    index: int,
    image: np.ndarray,
    dist: ParamDistribution,
    noise: GaussianNoise,
    seed: int,
    keep_ground_truth: bool,
) -> MeasurementPair:
    theta1, theta2 = dist.sample_pair(stream(seed, "pair", index))
    y1 = measure(theta1, image, noise, derive_seed(seed, "noise", index, 1))
    y2 = measure(theta2, image, noise, derive_seed(seed, "noise", index, 2))
    return MeasurementPair(
        y1=y1,
        y2=y2,
        theta1=theta1,
        theta2=theta2,
        x_eval=image if keep_ground_truth else None,
        seed=derive_seed(seed, "pair", index),
    )


def build_pair_dataset(
    images: Sequence[np.ndarray],
    dist: ParamDistribution,
    noise: GaussianNoise,
    seed: int,
    keep_ground_truth: bool = False,
    threads: Optional[int] = None,
) -> list[MeasurementPair]:
    """
    Two frozen measurements per image; per-image seeds make threading output-neutral.

    threads defaults to settings.threads (PAIRWISE_THREADS).
    """
    threads = settings.threads if threads is None else threads
    if len(images) == 0:
        raise DatasetError("No latent images to measure")

    def build(index: int) -> MeasurementPair:
        image = np.asarray(images[index], dtype=np.float64)
        if image.shape != dist.image_shape:
            raise DatasetError(f"Image {index} has shape {image.shape}, expected {dist.image_shape}")
        return _make_pair(index, image, dist, noise, seed, keep_ground_truth)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(build, range(len(images))))
    else:
        pairs = [build(i) for i in range(len(images))]
    logger.info(f"Built {len(pairs)} measurement pairs ({dist.family}, sigma={noise.sigma}, {threads} threads)")
    return pairs


# ==========================================
# DIRECTORY FORMAT
# ==========================================

def _record_name(index: int) -> str:
    return f"{index:05d}.uim"


def _descriptor_tensors(pair: MeasurementPair) -> dict[str, np.ndarray]:
    tensors: dict[str, np.ndarray] = {}
    for slot, theta in (("theta1", pair.theta1), ("theta2", pair.theta2)):
        for key, value in theta.descriptor().items():
            tensors[f"{slot}/{key}"] = value
    return tensors


def _descriptor(tensors: dict[str, np.ndarray], slot: str) -> dict[str, np.ndarray]:
    prefix = f"{slot}/"
    return {k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)}


def save_dataset(path: PathLike, dataset: PairDataset) -> Path:
    """Write a dataset directory; blind datasets seal theta descriptors away from the records"""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    if dataset.dist.is_compressive:
        save_tensors(root / PHI_FILE, {"phi": dataset.dist.phi})

    records = []
    for index, pair in enumerate(dataset.pairs):
        name = _record_name(index)
        tensors = {"y1": pair.y1.data, "y2": pair.y2.data}
        if pair.has_parameters:
            descriptors = _descriptor_tensors(pair)
            if dataset.blind:
                save_tensors(root / SEALED_DIR / name, descriptors)
            else:
                tensors.update(descriptors)
        save_tensors(root / RECORDS_DIR / name, tensors)
        if pair.x_eval is not None:
            save_tensors(root / GROUND_TRUTH_DIR / name, {"x": pair.x_eval.data})
        records.append({"name": name, "seed": str(pair.seed), "sha256": pair.fingerprint()})

    manifest = {
        "format": DATASET_FORMAT,
        "distribution": dataset.dist.to_manifest(),
        "noise_sigma": dataset.noise.sigma,
        "seed": dataset.seed,
        "blind": dataset.blind,
        "has_ground_truth": dataset.has_ground_truth,
        "metadata": dataset.metadata,
        "records": records,
    }
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    logger.info(f"💾 Wrote {len(records)} records to {root}")
    return root


def read_manifest(path: PathLike) -> dict[str, Any]:
    manifest_path = Path(path) / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DatasetError(f"No dataset manifest at {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DatasetError(f"Corrupt manifest {manifest_path}: {str(e)}")
    if manifest.get("format") != DATASET_FORMAT:
        raise DatasetError(f"Unsupported dataset format {manifest.get('format')!r}")
    return manifest


def manifest_hash(path: PathLike) -> str:
    return hashlib.sha256((Path(path) / MANIFEST_NAME).read_bytes()).hexdigest()


def load_dataset(path: PathLike, include_ground_truth: bool = False) -> PairDataset:
    """Read a dataset directory; ground truth stays on disk unless requested"""
    root = Path(path)
    manifest = read_manifest(root)
    phi = None
    if (root / PHI_FILE).is_file():
        phi = load_tensors(root / PHI_FILE)["phi"]
    try:
        dist = ParamDistribution.from_manifest(manifest["distribution"], phi=phi)
    except (KeyError, PairwiseImagingError) as e:
        raise DatasetError(f"Dataset {root} has an invalid distribution block: {str(e)}")

    pairs = []
    for record in manifest["records"]:
        tensors = load_tensors(root / RECORDS_DIR / record["name"])
        theta1 = theta2 = None
        if not manifest["blind"]:
            theta1 = dist.from_descriptor(_descriptor(tensors, "theta1"))
            theta2 = dist.from_descriptor(_descriptor(tensors, "theta2"))
        x_eval = None
        if include_ground_truth:
            gt_path = root / GROUND_TRUTH_DIR / record["name"]
            if not gt_path.is_file():
                raise DatasetError(f"Ground truth requested but missing for record {record['name']}")
            x_eval = load_tensors(gt_path)["x"]
        pairs.append(
            MeasurementPair(
                y1=tensors["y1"], y2=tensors["y2"], theta1=theta1, theta2=theta2,
                x_eval=x_eval, seed=int(record["seed"]),
            )
        )
        if "sha256" in record and pairs[-1].fingerprint() != record["sha256"]:
            raise DatasetError(f"Record {record['name']} does not match its manifest digest")
    logger.info(f"Loaded {len(pairs)} pairs from {root} (blind={manifest['blind']}, ground truth={include_ground_truth})")
    return PairDataset(
        dist=dist,
        noise=GaussianNoise(float(manifest["noise_sigma"])),
        pairs=pairs,
        seed=int(manifest["seed"]),
        blind=bool(manifest["blind"]),
        metadata=manifest.get("metadata", {}),
    )


def load_sealed_parameters(path: PathLike) -> list[tuple[MeasurementOp, MeasurementOp]]:
    """Operators of a blind dataset, for post-hoc analysis only"""
    root = Path(path)
    dataset = load_dataset(root)
    if not dataset.blind:
        raise DatasetError(f"Dataset {root} is not blind; operators are in the records")
    manifest = read_manifest(root)
    operators = []
    for record in manifest["records"]:
        tensors = load_tensors(root / SEALED_DIR / record["name"])
        operators.append(
            (
                dataset.dist.from_descriptor(_descriptor(tensors, "theta1")),
                dataset.dist.from_descriptor(_descriptor(tensors, "theta2")),
            )
        )
    return operators
