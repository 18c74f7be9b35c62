"""Training loop, proxy data, optimizer, evaluation and checkpoints"""
from .checkpoint import Checkpoint, CheckpointMeta, load_checkpoint, save_checkpoint
from .evaluation import EvalResult, evaluate, predict_images, psnr
from .optim import AdamState, PlateauSchedule, adam_step
from .proxy import ProxySample, make_proxy_batch
from .trainer import Trainer, TrainingState, TrainResult

__all__ = [
    "AdamState",
    "Checkpoint",
    "CheckpointMeta",
    "EvalResult",
    "PlateauSchedule",
    "ProxySample",
    "Trainer",
    "TrainResult",
    "TrainingState",
    "adam_step",
    "evaluate",
    "load_checkpoint",
    "make_proxy_batch",
    "predict_images",
    "psnr",
    "save_checkpoint",
]
