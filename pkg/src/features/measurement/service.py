"""
Measurement Service
Dataset generation and Q-matrix analysis driven by an ExperimentConfig
"""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ...shared.configfile import write_resolved_config
from ...shared.constants import FAMILY_CS, REGIME_BLIND
from ...shared.entities import ExperimentConfig
from ...shared.exceptions import SizeLimitError
from ...shared.rng import derive_seed
from .dataset import PairDataset, build_pair_dataset, manifest_hash, save_dataset
from .distributions import ParamDistribution
from .gram import QRankReport, extreme_eigenvalues, gram_expectation, gram_of_operators, q_rank_report
from .kernels import kernel_spectrum
from .operators import ConvolutionOp, GaussianNoise, orthonormal_rows
from .synthetic import SyntheticImages, load_directory_images

logger = logging.getLogger(__name__)

TRAIN_SPLIT = "train"
EVAL_SPLIT = "eval"


@dataclass
class QAnalysis:
    """Outcome of analyze-q"""
    full_rank: bool
    rank: Optional[int]
    dimension: int
    lambda_min: float
    lambda_max: float
    report: Optional[QRankReport] = None
    spectrum_min_ratio: Optional[float] = None


class MeasurementService:
    """Builds p_theta / p_eps from configs, generates datasets and analyzes Q"""

    @staticmethod
    def phi_for(config: ExperimentConfig) -> np.ndarray:
        m = config.measurement
        return orthonormal_rows(m.measurements_per_patch, m.patch_size * m.patch_size, config.experiment.seed)

    def distribution(
        self, config: ExperimentConfig, image_size: Optional[int] = None, boundary: str = "zero", seed_purpose: str = "theta"
    ) -> ParamDistribution:
        m = config.measurement
        size = image_size or m.image_size
        seed = derive_seed(config.experiment.seed, seed_purpose)
        if config.experiment.family == FAMILY_CS:
            return ParamDistribution.compressive(self.phi_for(config), (size, size), seed=seed)
        return ParamDistribution.motion(
            m.kernel_size,
            (size, size),
            seed=seed,
            max_walk_length=m.walk_length,
            max_turn=m.max_turn,
            boundary=boundary,
        )

    @staticmethod
    def noise(config: ExperimentConfig) -> GaussianNoise:
        return GaussianNoise(config.noise_sigma())

    @staticmethod
    def latent_images(config: ExperimentConfig, split: str) -> Sequence[np.ndarray]:
        d, size, seed = config.data, config.measurement.image_size, config.experiment.seed
        count = d.num_images if split == TRAIN_SPLIT else d.num_eval
        if d.source == "synthetic":
            return SyntheticImages(count, size, seed, purpose=f"{split}-images")
        images = load_directory_images(d.image_dir, size, d.num_images + d.num_eval)
        return images[: d.num_images] if split == TRAIN_SPLIT else images[d.num_images : d.num_images + d.num_eval]

    def build_split(self, config: ExperimentConfig, split: str) -> PairDataset:
        seed = config.experiment.seed
        dist = self.distribution(config)
        noise = self.noise(config)
        keep_truth = config.data.keep_ground_truth if split == TRAIN_SPLIT else True
        pairs = build_pair_dataset(
            self.latent_images(config, split),
            dist,
            noise,
            seed=derive_seed(seed, split),
            keep_ground_truth=keep_truth,
            threads=config.experiment.threads,
        )
        return PairDataset(
            dist=dist,
            noise=noise,
            pairs=pairs,
            seed=seed,
            blind=config.experiment.regime == REGIME_BLIND,
            metadata={"split": split, "regime": config.experiment.regime},
        )

    def generate(self, config: ExperimentConfig, out_dir: Path) -> dict[str, Path]:
        """Write train (and eval, when num_eval > 0) dataset directories under out_dir"""
        out_dir = Path(out_dir)
        logger.info(f"🧪 Generating {config.experiment.family} data into {out_dir}")
        written = {}
        splits = [TRAIN_SPLIT] + ([EVAL_SPLIT] if config.data.num_eval > 0 else [])
        for split in splits:
            path = save_dataset(out_dir / split, self.build_split(config, split))
            written[split] = path
            logger.info(f"✅ {split}: manifest sha256 {manifest_hash(path)[:16]}")
        write_resolved_config(config, out_dir)
        return written

    def analyze_q(self, config: ExperimentConfig, out_dir: Path) -> QAnalysis:
        """Rank verdict, eigenvalue CSV and (motion kernels) average spectrum grid"""
        a = config.analysis
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        dist = self.distribution(config, image_size=a.domain_size, boundary=a.boundary, seed_purpose="analysis")
        n = a.domain_size * a.domain_size

        ops = None
        if a.single_operator:
            ops = [dist.sample()]
        elif dist.is_compressive and a.exhaustive:
            ops = dist.support()

        spectrum_ratio = None
        if not dist.is_compressive:
            ops = ops or [dist.sample() for _ in range(a.n_samples)]
            _, average = kernel_spectrum([op.kernel for op in ops if isinstance(op, ConvolutionOp)], (a.domain_size, a.domain_size))
            spectrum_ratio = float(average.min() / average.max())
            self._write_grid(out_dir / "spectrum.csv", average)
            logger.info(f"Average kernel spectrum: min/max = {spectrum_ratio:.4f}")

        try:
            q = gram_of_operators(ops) if ops is not None else gram_expectation(dist, a.n_samples)
        except SizeLimitError:
            logger.warning(f"Q on {n} pixels exceeds the materialization limit; using matrix-free extremes")
            lam_min, lam_max = extreme_eigenvalues(dist, a.n_samples, seed=config.experiment.seed)
            analysis = QAnalysis(
                full_rank=lam_min > a.threshold * lam_max, rank=None, dimension=n,
                lambda_min=lam_min, lambda_max=lam_max, spectrum_min_ratio=spectrum_ratio,
            )
        else:
            report = q_rank_report(q, a.threshold)
            self._write_eigenvalues(out_dir / "eigenvalues.csv", report.eigenvalues)
            analysis = QAnalysis(
                full_rank=report.full_rank, rank=report.rank, dimension=n,
                lambda_min=float(report.eigenvalues[-1]), lambda_max=float(report.eigenvalues[0]),
                report=report, spectrum_min_ratio=spectrum_ratio,
            )

        verdict = "FULL RANK" if analysis.full_rank else "RANK DEFICIENT"
        logger.info(f"📊 Q verdict: {verdict} (rank {analysis.rank} of {n}, lambda_min {analysis.lambda_min:.3e})")
        (out_dir / "q_report.txt").write_text(
            f"family = {config.experiment.family}\n"
            f"dimension = {n}\n"
            f"rank = {analysis.rank}\n"
            f"full_rank = {str(analysis.full_rank).lower()}\n"
            f"lambda_min = {analysis.lambda_min:.6e}\n"
            f"lambda_max = {analysis.lambda_max:.6e}\n",
            encoding="utf-8",
        )
        write_resolved_config(config, out_dir)
        return analysis

    @staticmethod
    def _write_eigenvalues(path: Path, eigenvalues: np.ndarray) -> None:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["index", "eigenvalue"])
            writer.writerows((i, f"{v:.10e}") for i, v in enumerate(eigenvalues))

    @staticmethod
    def _write_grid(path: Path, grid: np.ndarray) -> None:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            csv.writer(handle).writerows([[f"{v:.8e}" for v in row] for row in grid])


# Global service instance
measurement_service = MeasurementService()
