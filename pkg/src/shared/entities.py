"""
Entity Models - Configuration and Record Schemas
Combined pydantic models for all features (losses, training, experiments, metrics)
"""
from enum import Enum
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .constants import (
    CS_SELF_WEIGHT,
    DEBLUR_WEIGHT,
    DEFAULT_LR,
    FAMILY_BLUR,
    FAMILY_CS,
    REGIME_BLIND,
    REGIME_NONBLIND,
    REGIME_SUPERVISED,
    TWO_GRAY_LEVELS,
)

RegimeName = Literal["supervised", "unsup-nonblind", "unsup-blind"]
FamilyName = Literal["cs-shifted-partitions", "motion-kernels"]


class StrictModel(BaseModel):
    """Base schema that rejects unknown keys"""
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


# ==========================================
# LOSS ENTITIES
# ==========================================

class LossKind(str, Enum):
    """Norm used as the loss function rho"""
    L2 = "L2"
    L1 = "L1"


class LossWeights(StrictModel):
    """
    Weights of the combined objective:
    L_swap + gamma * L_self + alpha * L_prox:theta + beta * L_prox:x
    """
    gamma: float = Field(default=0.0, ge=0.0, description="Self-measurement loss weight")
    alpha: float = Field(default=0.0, ge=0.0, description="Proxy parameter loss weight")
    beta: float = Field(default=0.0, ge=0.0, description="Proxy image loss weight")


# ==========================================
# TRAINING ENTITIES
# ==========================================

class TrainConfig(StrictModel):
    """
    Hyperparameters of one training run.

    **Learning rate schedule:** Adam at `lr`, divided by sqrt(10) whenever the
    validation objective fails to improve by 0.1% for `plateau_patience` epochs,
    at most `lr_drops` times; a plateau after the final drop stops training.
    """
    regime: RegimeName = REGIME_NONBLIND
    weights: LossWeights = Field(default_factory=LossWeights)
    rho: LossKind = LossKind.L2
    lr: float = Field(default=DEFAULT_LR, gt=0.0)
    lr_drops: int = Field(default=2, ge=0)
    plateau_patience: int = Field(default=5, ge=1)
    batch_size: int = Field(default=16, ge=1)
    max_epochs: int = Field(default=20, ge=1)
    seed: int = Field(default=0, ge=0)
    eval_interval: int = Field(default=1, ge=1, description="Epochs between PSNR evaluations")
    val_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    proxy_warmup_steps: int = Field(default=0, ge=0)
    stop_gradient_kernel: bool = Field(default=True, description="Isolate estimated kernels from g")
    share_encoder: bool = Field(default=False, description="Let kernel-head losses train the encoder")
    check_gradient_isolation: bool = False

    @model_validator(mode="after")
    def check_regime_weights(self) -> "TrainConfig":
        if self.regime != REGIME_BLIND and self.weights.alpha > 0:
            raise ValueError("alpha > 0 requires the unsup-blind regime (no parameter estimator otherwise)")
        return self

    @property
    def is_unsupervised(self) -> bool:
        return self.regime in (REGIME_NONBLIND, REGIME_BLIND)

    @property
    def is_blind(self) -> bool:
        return self.regime == REGIME_BLIND


class EpochRecord(StrictModel):
    """One row of the metrics history"""
    epoch: int
    step: int
    swap: float = 0.0
    self_loss: float = 0.0
    prox_theta: float = 0.0
    prox_x: float = 0.0
    supervised: float = 0.0
    total: float = 0.0
    lr: float
    val_objective: Optional[float] = None
    val_psnr: Optional[float] = None


# ==========================================
# EXPERIMENT CONFIG FILE ENTITIES
# ==========================================

class ExperimentSection(StrictModel):
    regime: RegimeName = REGIME_NONBLIND
    family: FamilyName = FAMILY_CS
    seed: int = Field(default=0, ge=0)
    output_dir: str = "runs/default"
    threads: Optional[int] = Field(default=None, ge=1, description="Defaults to PAIRWISE_THREADS")


class MeasurementSection(StrictModel):
    """Measurement model: CS patches (patch_size, ratio) or motion blur (kernel_size)"""
    image_size: int = Field(default=32, ge=2)
    patch_size: int = Field(default=8, ge=1)
    ratio: float = Field(default=0.25, gt=0.0, le=1.0)
    kernel_size: int = Field(default=5, ge=1)
    max_walk_length: Optional[int] = Field(default=None, ge=0)
    max_turn: float = Field(default=0.8, ge=0.0, description="Per-step direction change bound (radians)")
    noise_sigma: Optional[float] = Field(default=None, ge=0.0, description="Defaults to 0 for CS, two gray levels for blur")

    @property
    def measurements_per_patch(self) -> int:
        return max(1, int(round(self.ratio * self.patch_size * self.patch_size)))

    @property
    def walk_length(self) -> int:
        return self.kernel_size - 1 if self.max_walk_length is None else self.max_walk_length


class DataSection(StrictModel):
    num_images: int = Field(default=64, ge=1)
    num_eval: int = Field(default=16, ge=0)
    source: Literal["synthetic", "directory"] = "synthetic"
    image_dir: Optional[str] = None
    keep_ground_truth: bool = True

    @model_validator(mode="after")
    def check_source(self) -> "DataSection":
        if self.source == "directory" and not self.image_dir:
            raise ValueError("source = directory requires image_dir")
        return self


class ModelSection(StrictModel):
    widths: Optional[list[int]] = None

    @field_validator("widths", mode="before")
    @classmethod
    def split_widths(cls, value):
        if isinstance(value, str):
            return [int(v) for v in value.replace(" ", "").split(",") if v]
        return value

    @field_validator("widths")
    @classmethod
    def positive_widths(cls, value):
        if value is not None and (not value or any(w < 1 for w in value)):
            raise ValueError("widths must be a non-empty list of positive integers")
        return value


class TrainSection(StrictModel):
    gamma: Optional[float] = Field(default=None, ge=0.0)
    alpha: Optional[float] = Field(default=None, ge=0.0)
    beta: Optional[float] = Field(default=None, ge=0.0)
    rho: Optional[LossKind] = None
    lr: float = Field(default=DEFAULT_LR, gt=0.0)
    lr_drops: int = Field(default=2, ge=0)
    plateau_patience: int = Field(default=5, ge=1)
    batch_size: int = Field(default=16, ge=1)
    max_epochs: int = Field(default=20, ge=1)
    eval_interval: int = Field(default=1, ge=1)
    val_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    proxy_warmup_steps: int = Field(default=0, ge=0)
    stop_gradient_kernel: bool = True
    share_encoder: bool = False
    check_gradient_isolation: bool = False


class AnalysisSection(StrictModel):
    n_samples: int = Field(default=1000, ge=1)
    threshold: float = Field(default=1e-8, gt=0.0)
    domain_size: int = Field(default=16, ge=2, description="Side of the Q analysis domain")
    boundary: Literal["zero", "circular"] = "circular"
    exhaustive: bool = Field(default=True, description="Average over every partition offset (CS)")
    single_operator: bool = Field(default=False, description="Analyze one fixed operator instead of the family")


class TheorySection(StrictModel):
    family: Literal["cs", "orthogonal", "fixed"] = "cs"
    image_size: int = Field(default=4, ge=2)
    patch_size: int = Field(default=2, ge=1)
    measurements: int = Field(default=2, ge=1)
    family_size: int = Field(default=64, ge=1, description="Matrices drawn for the orthogonal family")
    n_samples: int = Field(default=100_000, ge=10)
    n_train: int = Field(default=10_000, ge=10)
    n_test: int = Field(default=10_000, ge=10)
    sigma: float = Field(default=0.01, ge=0.0)
    floor_sigma: float = Field(default=0.05, ge=0.0)
    bandwidth: float = Field(default=1.5, gt=0.0, description="Correlation length of the Gaussian image prior")
    allow_rank_deficient: bool = False


class ExperimentConfig(StrictModel):
    """Fully resolved experiment file"""
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    measurement: MeasurementSection = Field(default_factory=MeasurementSection)
    data: DataSection = Field(default_factory=DataSection)
    model: ModelSection = Field(default_factory=ModelSection)
    train: TrainSection = Field(default_factory=TrainSection)
    analysis: AnalysisSection = Field(default_factory=AnalysisSection)
    theory: TheorySection = Field(default_factory=TheorySection)

    @model_validator(mode="after")
    def check_family_regime(self) -> "ExperimentConfig":
        if self.experiment.family == FAMILY_CS and self.experiment.regime == REGIME_BLIND:
            raise ValueError("compressive sensing has no blind regime; use motion-kernels")
        return self

    def noise_sigma(self) -> float:
        """Measurement noise std; blur experiments default to two gray levels"""
        if self.measurement.noise_sigma is not None:
            return self.measurement.noise_sigma
        return TWO_GRAY_LEVELS if self.experiment.family == FAMILY_BLUR else 0.0

    def default_weights(self) -> LossWeights:
        """Family defaults: CS gamma=0.05; blind deblurring alpha=beta=gamma=1"""
        if self.experiment.family == FAMILY_CS:
            defaults = LossWeights(gamma=CS_SELF_WEIGHT, alpha=0.0, beta=0.0)
        elif self.experiment.regime == REGIME_BLIND:
            defaults = LossWeights(gamma=DEBLUR_WEIGHT, alpha=DEBLUR_WEIGHT, beta=DEBLUR_WEIGHT)
        else:
            defaults = LossWeights(gamma=DEBLUR_WEIGHT, alpha=0.0, beta=DEBLUR_WEIGHT)
        return LossWeights(
            gamma=defaults.gamma if self.train.gamma is None else self.train.gamma,
            alpha=defaults.alpha if self.train.alpha is None else self.train.alpha,
            beta=defaults.beta if self.train.beta is None else self.train.beta,
        )

    def train_config(self) -> TrainConfig:
        """Build the TrainConfig for this experiment"""
        rho = self.train.rho or (LossKind.L2 if self.experiment.family == FAMILY_CS else LossKind.L1)
        weights = self.default_weights()
        if self.experiment.regime == REGIME_SUPERVISED:
            weights = LossWeights()
        return TrainConfig(
            regime=self.experiment.regime,
            weights=weights,
            rho=rho,
            lr=self.train.lr,
            lr_drops=self.train.lr_drops,
            plateau_patience=self.train.plateau_patience,
            batch_size=self.train.batch_size,
            max_epochs=self.train.max_epochs,
            seed=self.experiment.seed,
            eval_interval=self.train.eval_interval,
            val_fraction=self.train.val_fraction,
            proxy_warmup_steps=self.train.proxy_warmup_steps,
            stop_gradient_kernel=self.train.stop_gradient_kernel,
            share_encoder=self.train.share_encoder,
            check_gradient_isolation=self.train.check_gradient_isolation,
        )

    @property
    def is_blur(self) -> bool:
        return self.experiment.family == FAMILY_BLUR
