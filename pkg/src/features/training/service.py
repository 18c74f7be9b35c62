"""
Training Service
Train, evaluate and reconstruct driven by an ExperimentConfig
"""
import csv
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from ...shared.configfile import write_resolved_config
from ...shared.constants import FAMILY_CS, REGIME_BLIND, REGIME_SUPERVISED
from ...shared.entities import ExperimentConfig
from ...shared.exceptions import ConfigError, DatasetError, ShapeMismatchError
from ...shared.imageio import center_crop, read_image, write_pgm
from ...shared.rng import derive_seed
from ..measurement.dataset import PairDataset, load_dataset
from ..measurement.operators import CompressivePatchOp, measure
from ..measurement.service import EVAL_SPLIT, TRAIN_SPLIT, measurement_service
from ..models import ImageEstimator, ParamEstimator, forward_image
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .evaluation import EvalResult, evaluate, predict_images
from .trainer import Trainer, TrainResult

logger = logging.getLogger(__name__)

FINAL_CHECKPOINT = "final.uim"
BEST_CHECKPOINT = "best.uim"
PSNR_REPORT = "psnr.csv"
RECON_DIR = "reconstructions"


class TrainingService:
    """Wires datasets, estimators and the trainer together"""

    # ==========================================
    # MODELS AND DATA
    # ==========================================

    @staticmethod
    def build_models(config: ExperimentConfig) -> tuple[ImageEstimator, Optional[ParamEstimator]]:
        m, seed = config.measurement, config.experiment.seed
        widths = config.model.widths
        if config.experiment.family == FAMILY_CS:
            f = ImageEstimator("cs", m.patch_size, widths=widths, seed=derive_seed(seed, "f-init"))
            return f, None
        f = ImageEstimator("deblur", m.image_size, widths=widths, seed=derive_seed(seed, "f-init"))
        g = None
        if config.experiment.regime == REGIME_BLIND:
            g = ParamEstimator(
                f, m.kernel_size, seed=derive_seed(seed, "g-init"), share_encoder=config.train.share_encoder
            )
        return f, g

    @staticmethod
    def training_data(config: ExperimentConfig, data_dir: Optional[Path] = None) -> PairDataset:
        """Training pairs; ground truth is only read for the supervised baseline"""
        supervised = config.experiment.regime == REGIME_SUPERVISED
        if data_dir is not None:
            dataset = load_dataset(data_dir, include_ground_truth=supervised)
        else:
            dataset = measurement_service.build_split(config, TRAIN_SPLIT)
            if not supervised:
                dataset.pairs = [p.without_ground_truth() for p in dataset.pairs]
        if dataset.blind and any(p.has_parameters for p in dataset.pairs):
            dataset.pairs = [p.without_parameters() for p in dataset.pairs]
        if dataset.family != config.experiment.family:
            raise ConfigError(f"Dataset family {dataset.family} does not match config family {config.experiment.family}")
        return dataset

    @staticmethod
    def eval_data(config: ExperimentConfig, eval_dir: Optional[Path] = None) -> Optional[PairDataset]:
        if eval_dir is not None:
            return load_dataset(eval_dir, include_ground_truth=True)
        if config.data.num_eval == 0:
            return None
        return measurement_service.build_split(config, EVAL_SPLIT)

    @staticmethod
    def _check_geometry(checkpoint: Checkpoint, dataset: PairDataset) -> None:
        expected_variant = "cs" if dataset.family == FAMILY_CS else "deblur"
        if checkpoint.meta.variant != expected_variant:
            raise ShapeMismatchError(f"Checkpoint variant {checkpoint.meta.variant} cannot read {dataset.family} data")
        if dataset.family == FAMILY_CS:
            phi = dataset.dist.phi
            expected_size = dataset.dist.patch_size
            if checkpoint.phi is not None and checkpoint.phi.shape != phi.shape:
                raise ShapeMismatchError(f"Checkpoint phi {checkpoint.phi.shape} vs dataset phi {phi.shape}")
        else:
            expected_size = dataset.image_shape[0]
        if checkpoint.meta.input_size != expected_size or dataset.image_shape[0] != dataset.image_shape[1]:
            raise ShapeMismatchError(
                f"Checkpoint input size {checkpoint.meta.input_size} does not fit data of shape {dataset.image_shape}"
            )

    # ==========================================
    # COMMANDS
    # ==========================================

    def train(
        self,
        config: ExperimentConfig,
        out_dir: Path,
        data_dir: Optional[Path] = None,
        eval_dir: Optional[Path] = None,
        resume: Optional[Path] = None,
    ) -> TrainResult:
        """Train, then write final/best checkpoints, metrics.csv and the resolved config"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        train_config = config.train_config()
        logger.info(f"🏋️ Training {config.experiment.family} in regime {train_config.regime} -> {out_dir}")

        dataset = self.training_data(config, data_dir)
        eval_set = self.eval_data(config, eval_dir)
        state = None
        if resume is not None:
            checkpoint = load_checkpoint(resume, seed=config.experiment.seed)
            self._check_geometry(checkpoint, dataset)
            f, g, state = checkpoint.f, checkpoint.g, checkpoint.state
            if (g is None) != (train_config.regime != REGIME_BLIND):
                raise ConfigError(f"Checkpoint {resume} does not match regime {train_config.regime}")
            logger.info(f"Resuming from step {state.step}, epoch {state.epoch}")
        else:
            f, g = self.build_models(config)

        trainer = Trainer(
            train_config,
            f,
            dataset,
            g=g,
            eval_pairs=eval_set.pairs if eval_set is not None else None,
            out_dir=out_dir,
            state=state,
        )
        result = trainer.run()

        phi = dataset.dist.phi if dataset.dist.is_compressive else None
        save_checkpoint(out_dir / FINAL_CHECKPOINT, f, g, state=result.state, phi=phi)
        save_checkpoint(out_dir / BEST_CHECKPOINT, f, g, phi=phi, params=result.best_state)
        write_resolved_config(config, out_dir)
        return result

    def evaluate(
        self,
        config: ExperimentConfig,
        checkpoint_path: Path,
        out_dir: Path,
        eval_dir: Optional[Path] = None,
    ) -> EvalResult:
        """Per-image and mean PSNR CSV plus 8-bit PGM reconstructions"""
        out_dir = Path(out_dir)
        eval_set = self.eval_data(config, eval_dir)
        if eval_set is None:
            raise DatasetError("No evaluation set: pass an evaluation dataset or set num_eval > 0")
        checkpoint = load_checkpoint(checkpoint_path)
        self._check_geometry(checkpoint, eval_set)

        result = evaluate(checkpoint.f, eval_set.pairs, eval_set.family, batch_size=config.train.batch_size)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / PSNR_REPORT, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["image", "psnr_db"])
            for index, value in enumerate(result.psnrs):
                writer.writerow([f"{index:05d}", f"{value:.4f}"])
            writer.writerow(["mean", f"{result.mean_psnr:.4f}"])
        for index, image in enumerate(result.reconstructions):
            write_pgm(out_dir / RECON_DIR / f"{index:05d}.pgm", image)
        write_resolved_config(config, out_dir)
        logger.info(f"✅ Wrote {len(result.psnrs)} reconstructions to {out_dir / RECON_DIR}")
        return result

    def reconstruct(self, config: ExperimentConfig, checkpoint_path: Path, input_path: Path, output_path: Path) -> np.ndarray:
        """
        Single image in, reconstruction out.

        deblur: the input is the blurry observation.
        cs: the input is a clean image, measured here with the offset-(0, 0) partition.
        """
        checkpoint = load_checkpoint(checkpoint_path)
        f = checkpoint.f
        image = read_image(input_path)

        if checkpoint.meta.variant == "deblur":
            if image.shape != f.input_shape:
                if min(image.shape) < f.input_size:
                    raise ShapeMismatchError(f"Input {image.shape} is smaller than the estimator input {f.input_shape}")
                logger.warning(f"Center-cropping {image.shape} input to {f.input_shape}")
                image = center_crop(image, f.input_size)
            output = forward_image(f, image)
            reconstruction = np.asarray(output.data[0, 0], dtype=np.float64)
        else:
            if checkpoint.phi is None:
                raise ShapeMismatchError("Compressive checkpoint has no measurement matrix")
            op = CompressivePatchOp(np.asarray(checkpoint.phi, dtype=np.float64), image.shape, offset=(0, 0))
            noise = measurement_service.noise(config)
            y = measure(op, image, noise, derive_seed(config.experiment.seed, "reconstruct"))
            prediction = predict_images(f, [op], [y])[0]
            reconstruction = np.where(op.coverage_mask(), np.asarray(prediction.data, dtype=np.float64), 0.0)

        write_pgm(output_path, reconstruction)
        logger.info(f"✅ Reconstruction written to {output_path}")
        return reconstruction


# Global service instance
training_service = TrainingService()
