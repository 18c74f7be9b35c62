"""
Training loop for the three regimes.

supervised:      f against ground-truth images; (theta, eps) redrawn every epoch
unsup-nonblind:  swap + self (+ proxy image) losses on frozen pairs, theta known
unsup-blind:     as above with theta_hat = g(y); g trained only by the proxy kernel loss
"""
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ...shared.constants import FAMILY_CS, REGIME_NONBLIND, REGIME_SUPERVISED
from ...shared.entities import EpochRecord, TrainConfig
from ...shared.exceptions import ConfigError, DatasetError, GradientIsolationError, NumericalFailureError
from ...shared.rng import derive_seed, stream
from ..losses import (
    LossParts,
    combined_objective,
    proxy_image_loss,
    proxy_param_loss,
    self_loss,
    supervised_loss,
    swap_loss,
)
from ..measurement.dataset import MeasurementPair, PairDataset
from ..measurement.operators import measure
from ..models import ImageEstimator, ParamEstimator, kernel_ops
from ..tensor_core import Tape, Tensor, getitem
from .evaluation import EvalResult, evaluate, network_batch, split_predictions
from .optim import AdamState, PlateauSchedule, adam_step
from .proxy import ProxySample, make_proxy_batch

logger = logging.getLogger(__name__)

METRICS_FIELDS = list(EpochRecord.model_fields)
FAILURE_DUMP = "failure_dump.npz"


@dataclass
class TrainingState:
    """Everything a resumed run continues from"""
    step: int = 0
    epoch: int = 0
    lr: Optional[float] = None
    adam: Optional[AdamState] = None
    # plateau schedule; None until the first epoch finishes
    drops_left: Optional[int] = None
    plateau_best: Optional[float] = None
    stale: int = 0


@dataclass
class TrainResult:
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_value: Optional[float] = None
    best_state: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    state: TrainingState = field(default_factory=TrainingState)
    stopped_early: bool = False
    fingerprints: list[str] = field(default_factory=list)


class Trainer:
    """Owns the models, optimizer state and schedule of one run"""

    def __init__(
        self,
        config: TrainConfig,
        f: ImageEstimator,
        dataset: PairDataset,
        g: Optional[ParamEstimator] = None,
        eval_pairs: Optional[Sequence[MeasurementPair]] = None,
        out_dir: Optional[Path] = None,
        state: Optional[TrainingState] = None,
    ):
        self.config = config
        self.f = f
        self.g = g
        self.dataset = dataset
        self.dist = dataset.dist
        self.noise = dataset.noise
        self.eval_pairs = list(eval_pairs) if eval_pairs else []
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.is_cs = dataset.family == FAMILY_CS
        self._check_regime()

        pairs = dataset.pairs if config.regime == REGIME_SUPERVISED else [p.without_ground_truth() for p in dataset.pairs]
        self.train_pairs, self.val_pairs = self._split(pairs)

        self.params = self.f.parameters() + (self.g.parameters() if self.g is not None else [])
        self.state = state or TrainingState()
        if self.state.adam is None:
            self.state.adam = AdamState.for_params(self.params)
        self.schedule = PlateauSchedule(
            self.state.lr if self.state.lr is not None else config.lr, config.lr_drops, config.plateau_patience
        )
        if self.state.drops_left is not None:
            self.schedule.drops_left = self.state.drops_left
            self.schedule.best = self.state.plateau_best
            self.schedule.stale = self.state.stale
        logger.info(
            f"🚀 Trainer ready: regime={config.regime}, family={dataset.family}, "
            f"{len(self.train_pairs)} train / {len(self.val_pairs)} val pairs"
        )

    # ==========================================
    # SETUP
    # ==========================================

    def _check_regime(self) -> None:
        regime, blind = self.config.regime, self.config.is_blind
        if blind and not self.dataset.blind:
            raise ConfigError("unsup-blind training needs a blind dataset (operators sealed away)")
        if regime == REGIME_NONBLIND and self.dataset.blind:
            raise ConfigError("unsup-nonblind training needs operator parameters, but the dataset is blind")
        if blind and self.g is None:
            raise ConfigError("unsup-blind training needs a kernel estimator")
        if not blind and self.g is not None:
            raise ConfigError(f"{regime} training has no use for a kernel estimator")
        if regime == REGIME_SUPERVISED and not self.dataset.has_ground_truth:
            raise DatasetError("The supervised baseline needs ground-truth images in the dataset")
        if blind and self.is_cs:
            raise ConfigError("Compressive sensing has no blind regime")

    def _split(self, pairs: list[MeasurementPair]) -> tuple[list[MeasurementPair], list[MeasurementPair]]:
        n = len(pairs)
        n_val = int(round(n * self.config.val_fraction))
        if self.config.val_fraction > 0 and n >= 2:
            n_val = min(max(n_val, 1), n - 1)
        else:
            n_val = 0
        order = stream(self.config.seed, "split").permutation(n)
        val_idx, train_idx = sorted(order[:n_val]), sorted(order[n_val:])
        return [pairs[i] for i in train_idx], [pairs[i] for i in val_idx]

    # ==========================================
    # FORWARD PASSES
    # ==========================================

    def _predict(self, ops, ys) -> tuple[list[Tensor], list[Tensor]]:
        """f predictions (H, W) and, for blur inputs, the encoder features"""
        if self.is_cs:
            batch, counts = network_batch(self.f, ops, ys)
            return split_predictions(self.f.forward(batch), ops, counts), []
        stacked = np.stack([y.data if isinstance(y, Tensor) else y for y in ys])[:, None].astype(self.f.dtype)
        output, features = self.f.forward_with_features(Tensor(stacked))
        return [getitem(output, (i, 0)) for i in range(len(ys))], features

    def _estimated_ops(self, features: list[Tensor]):
        kernels = self.g.forward_features(features)
        ops = kernel_ops(kernels, self.dist.image_shape, self.dist.boundary, live=not self.config.stop_gradient_kernel)
        return kernels, ops

    def _proxy_parts(self, parts: LossParts, predictions, masks, step: int, seed: int) -> None:
        weights = self.config.weights
        samples: list[ProxySample] = make_proxy_batch(predictions, self.dist, self.noise, seed, step, masks)
        ops = [s.theta_plus for s in samples]
        images, features = self._predict(ops, [s.y_plus for s in samples])
        if weights.beta > 0:
            parts.prox_x = proxy_image_loss(
                images, [s.x_plus for s in samples], self.config.rho, [s.loss_weights() for s in samples]
            )
        if weights.alpha > 0 and self.g is not None:
            kernels = self.g.forward_features(features)
            parts.prox_theta = proxy_param_loss(kernels, ops, self.config.rho)

    def _unsupervised_parts(self, batch: list[MeasurementPair], step: int, seed: int) -> LossParts:
        cfg, weights = self.config, self.config.weights
        y1, y2 = [p.y1 for p in batch], [p.y2 for p in batch]
        if cfg.is_blind:
            f1, feats1 = self._predict(None, y1)
            f2, feats2 = self._predict(None, y2)
            _, theta1 = self._estimated_ops(feats1)
            _, theta2 = self._estimated_ops(feats2)
        else:
            theta1, theta2 = [p.theta1 for p in batch], [p.theta2 for p in batch]
            f1, _ = self._predict(theta1, y1)
            f2, _ = self._predict(theta2, y2)

        parts = LossParts(swap=swap_loss(f1, f2, theta1, theta2, y1, y2, cfg.rho))
        if weights.gamma > 0:
            parts.self_loss = self_loss(f1, f2, theta1, theta2, y1, y2, cfg.rho)
        if (weights.beta > 0 or weights.alpha > 0) and step >= cfg.proxy_warmup_steps:
            masks = [op.coverage_mask() for op in theta1 + theta2] if self.is_cs else None
            self._proxy_parts(parts, f1 + f2, masks, step, seed)
        return parts

    def _supervised_parts(self, batch: list[MeasurementPair], epoch: int, indices: Sequence[int], seed: int) -> LossParts:
        ops, ys, truths, masks = [], [], [], []
        for pair, index in zip(batch, indices):
            theta1, theta2 = self.dist.sample_pair(stream(seed, "supervised", epoch, index))
            for slot, theta in ((1, theta1), (2, theta2)):
                ops.append(theta)
                ys.append(measure(theta, pair.x_eval.data, self.noise, derive_seed(seed, "supervised-noise", epoch, index, slot)))
                truths.append(pair.x_eval)
                masks.append(theta.coverage_mask().astype(np.float64) if self.is_cs else None)
        images, _ = self._predict(ops, ys)
        return LossParts(supervised=supervised_loss(images, truths, self.config.rho, masks))

    # ==========================================
    # STEPS
    # ==========================================

    def _isolation_enforced(self) -> bool:
        cfg = self.config
        return cfg.check_gradient_isolation and cfg.is_blind and cfg.stop_gradient_kernel and not cfg.share_encoder

    def _check_isolation(self, tape: Tape, consistency: Tensor, parts: LossParts) -> None:
        """Consistency losses must not reach g; the kernel loss must not reach f"""
        for grad in tape.gradient(consistency, self.g.parameters()):
            if np.any(grad != 0.0):
                raise GradientIsolationError("Swap/self losses produced a gradient on the kernel estimator")
        if parts.prox_theta is not None:
            for grad in tape.gradient(parts.prox_theta, self.f.parameters()):
                if np.any(grad != 0.0):
                    raise GradientIsolationError("The proxy kernel loss produced a gradient on the image estimator")

    def _dump_failure(self, batch: list[MeasurementPair], epoch: int, step: int, message: str) -> None:
        dump_path = None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            dump_path = self.out_dir / FAILURE_DUMP
            np.savez(
                dump_path,
                y1=np.stack([p.y1.data for p in batch]),
                y2=np.stack([p.y2.data for p in batch]),
                epoch=epoch,
                step=step,
            )
        logger.error(f"❌ {message} at epoch {epoch}, step {step}; dump: {dump_path}")
        raise NumericalFailureError(message, dump_path=str(dump_path) if dump_path else None)

    def train_step(self, batch: list[MeasurementPair], epoch: int, indices: Sequence[int]) -> tuple[LossParts, float]:
        """One Adam step on a batch; returns the loss parts and the total objective"""
        cfg, step = self.config, self.state.step
        with Tape() as tape:
            if cfg.regime == REGIME_SUPERVISED:
                parts = self._supervised_parts(batch, epoch, indices, cfg.seed)
            else:
                parts = self._unsupervised_parts(batch, step, cfg.seed)
            total = combined_objective(parts, cfg.weights)
            consistency = None
            if self._isolation_enforced():
                consistency = parts.swap if parts.self_loss is None else parts.swap + parts.self_loss

        value = total.item()
        if not np.isfinite(value):
            self._dump_failure(batch, epoch, step, f"Non-finite training loss {value}")
        if consistency is not None:
            self._check_isolation(tape, consistency, parts)
        grads = tape.gradient(total, self.params)
        adam_step(self.params, grads, self.state.adam, self.schedule.lr)
        self.state.step += 1
        return parts, value

    # ==========================================
    # VALIDATION
    # ==========================================

    def validation_objective(self) -> Optional[float]:
        """Held-out objective with fixed seeds; never uses ground truth in unsupervised regimes"""
        if not self.val_pairs:
            return None
        seed = derive_seed(self.config.seed, "val")
        total, batch_size = 0.0, self.config.batch_size
        for start in range(0, len(self.val_pairs), batch_size):
            batch = self.val_pairs[start : start + batch_size]
            if self.config.regime == REGIME_SUPERVISED:
                indices = range(start, start + len(batch))
                parts = self._supervised_parts(batch, 0, indices, seed)
            else:
                parts = self._unsupervised_parts(batch, 0, seed)
            total += combined_objective(parts, self.config.weights).item() * len(batch)
        return total / len(self.val_pairs)

    def evaluate(self) -> Optional[EvalResult]:
        if not self.eval_pairs:
            return None
        return evaluate(self.f, self.eval_pairs, self.dataset.family, batch_size=self.config.batch_size)

    # ==========================================
    # LOOP
    # ==========================================

    def snapshot(self) -> dict[str, dict[str, np.ndarray]]:
        state = {"f": self.f.state_dict()}
        if self.g is not None:
            state["g"] = self.g.state_dict()
        return state

    def _write_metrics(self, history: list[EpochRecord]) -> None:
        if self.out_dir is None:
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        with open(self.out_dir / "metrics.csv", "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=METRICS_FIELDS)
            writer.writeheader()
            for record in history:
                writer.writerow({k: ("" if v is None else v) for k, v in record.model_dump().items()})

    def run(self) -> TrainResult:
        cfg = self.config
        if not self.train_pairs:
            raise DatasetError("No training pairs left after the validation split")
        if not self.eval_pairs:
            logger.warning("No evaluation set with ground truth; PSNR will not be reported")
        result = TrainResult(state=self.state)
        result.fingerprints.append(self.dataset.fingerprint())
        first_epoch = self.state.epoch

        for epoch in range(first_epoch, cfg.max_epochs):
            order = stream(cfg.seed, "order", epoch).permutation(len(self.train_pairs))
            sums: dict[str, float] = {}
            n_batches = 0
            for start in range(0, len(order), cfg.batch_size):
                indices = [int(i) for i in order[start : start + cfg.batch_size]]
                parts, total = self.train_step([self.train_pairs[i] for i in indices], epoch, indices)
                for key, value in parts.values().items():
                    sums[key] = sums.get(key, 0.0) + value
                sums["total"] = sums.get("total", 0.0) + total
                n_batches += 1
            means = {k: v / n_batches for k, v in sums.items()}

            val_objective = self.validation_objective()
            val_psnr = None
            if self.eval_pairs and ((epoch + 1) % cfg.eval_interval == 0 or epoch + 1 == cfg.max_epochs):
                val_psnr = self.evaluate().mean_psnr
            record = EpochRecord(
                epoch=epoch + 1,
                step=self.state.step,
                lr=self.schedule.lr,
                val_objective=val_objective,
                val_psnr=val_psnr,
                **means,
            )
            result.history.append(record)
            self.state.epoch = epoch + 1
            logger.info(
                f"Epoch {epoch + 1}/{cfg.max_epochs}: loss {record.total:.6f}"
                + (f", val {val_objective:.6f}" if val_objective is not None else "")
                + (f", PSNR {val_psnr:.2f} dB" if val_psnr is not None else "")
            )

            monitored = val_objective if val_objective is not None else record.total
            if self.schedule.update(monitored):
                result.best_epoch, result.best_value = epoch + 1, monitored
                result.best_state = self.snapshot()
            self.state.lr = self.schedule.lr
            self.state.drops_left = self.schedule.drops_left
            self.state.plateau_best = self.schedule.best
            self.state.stale = self.schedule.stale
            self._write_metrics(result.history)
            if self.schedule.should_stop:
                result.stopped_early = True
                break

        result.fingerprints.append(self.dataset.fingerprint())
        if result.fingerprints[0] != result.fingerprints[-1]:
            raise NumericalFailureError("Training pairs changed during training")
        if not result.best_state:
            result.best_state = self.snapshot()
        logger.info(f"✅ Training finished after {self.state.step} steps (best epoch {result.best_epoch})")
        return result
