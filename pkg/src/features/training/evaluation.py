"""Prediction helpers and PSNR evaluation"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ...shared.constants import FAMILY_CS, PIXEL_PEAK, PSNR_CAP_DB
from ...shared.exceptions import DatasetError, ShapeMismatchError
from ..measurement.dataset import MeasurementPair
from ..measurement.operators import MeasurementOp
from ..models import ImageEstimator
from ..tensor_core import Tensor, getitem

logger = logging.getLogger(__name__)


def _values(y) -> np.ndarray:
    return y.data if isinstance(y, Tensor) else np.asarray(y, dtype=np.float64)


def network_batch(f: ImageEstimator, ops: Sequence[MeasurementOp], ys: Sequence) -> tuple[Tensor, list[int]]:
    """Stacked estimator inputs for a batch and the row count of each sample"""
    if len(ops) != len(ys):
        raise ShapeMismatchError(f"{len(ops)} operators for {len(ys)} measurements")
    inputs = [op.network_input(_values(y)) for op, y in zip(ops, ys)]
    counts = [item.shape[0] for item in inputs]
    return Tensor(np.concatenate(inputs, axis=0).astype(f.dtype)), counts


def split_predictions(output: Tensor, ops: Sequence[MeasurementOp], counts: Sequence[int]) -> list[Tensor]:
    """Per-sample (H, W) images from a stacked estimator output"""
    images, start = [], 0
    for op, count in zip(ops, counts):
        images.append(op.to_image(getitem(output, slice(start, start + count))))
        start += count
    return images


def predict_images(f: ImageEstimator, ops: Sequence[MeasurementOp], ys: Sequence) -> list[Tensor]:
    """f applied to a batch of measurements; one (H, W) image per measurement"""
    batch, counts = network_batch(f, ops, ys)
    return split_predictions(f.forward(batch), ops, counts)


def psnr(prediction: np.ndarray, truth: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """10 log10(peak^2 / MSE) in dB, capped at PSNR_CAP_DB"""
    error = (np.asarray(prediction, dtype=np.float64) - np.asarray(truth, dtype=np.float64)) ** 2
    if mask is not None:
        error = error[np.asarray(mask, dtype=bool)]
    mse = float(error.mean()) if error.size else 0.0
    if mse <= 0.0:
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(PIXEL_PEAK**2 / mse), PSNR_CAP_DB))


@dataclass
class EvalResult:
    """Per-image PSNRs, their mean and the reconstructions"""
    psnrs: list[float] = field(default_factory=list)
    reconstructions: list[np.ndarray] = field(default_factory=list)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.psnrs)) if self.psnrs else float("nan")


def evaluate(
    f: ImageEstimator,
    eval_pairs: Sequence[MeasurementPair],
    family: str,
    ops: Optional[Sequence[MeasurementOp]] = None,
    batch_size: int = 16,
) -> EvalResult:
    """
    Reconstruct x from y1 of each pair and score against x_eval.

    cs: theta1 must be known (f reads theta^T y) and PSNR covers theta1's patches.
    blur: f reads y1 directly; operators may be absent (blind sets).
    """
    if not eval_pairs:
        raise DatasetError("Evaluation set is empty")
    if any(p.x_eval is None for p in eval_pairs):
        raise DatasetError("Evaluation needs ground-truth images (x_eval) for every pair")
    if ops is None:
        if family == FAMILY_CS and not all(p.has_parameters for p in eval_pairs):
            raise DatasetError("Compressive evaluation needs the partition of every measurement")
        ops = [p.theta1 for p in eval_pairs] if all(p.has_parameters for p in eval_pairs) else None

    result = EvalResult()
    for start in range(0, len(eval_pairs), batch_size):
        chunk = eval_pairs[start : start + batch_size]
        if ops is not None:
            chunk_ops = ops[start : start + batch_size]
            images = predict_images(f, chunk_ops, [p.y1 for p in chunk])
        else:
            stacked = np.stack([p.y1.data for p in chunk])[:, None].astype(f.dtype)
            output = f.forward(Tensor(stacked))
            images = [getitem(output, (i, 0)) for i in range(len(chunk))]
            chunk_ops = [None] * len(chunk)
        for pair, op, image in zip(chunk, chunk_ops, images):
            mask = op.coverage_mask() if (op is not None and family == FAMILY_CS) else None
            prediction = np.asarray(image.data, dtype=np.float64)
            result.psnrs.append(psnr(prediction, pair.x_eval.data, mask))
            result.reconstructions.append(prediction if mask is None else np.where(mask, prediction, 0.0))
    logger.info(f"📏 Evaluated {len(result.psnrs)} images: mean PSNR {result.mean_psnr:.2f} dB")
    return result
