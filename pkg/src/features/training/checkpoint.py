"""
Model checkpoints in the UIM1 container.

Tensor names:
    f/<param>, g/<param>          estimator parameters
    adam/m/<i>, adam/v/<i>        Adam moments, in optimizer order
    meta/<key>                    scalars and small vectors (step, epoch, lr, plateau state, geometry)
    meta/phi                      measurement matrix of a compressive run
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ...shared.exceptions import CheckpointError
from ...shared.serialization import load_tensors, save_tensors
from ..models import ImageEstimator, ParamEstimator
from .optim import AdamState
from .trainer import TrainingState

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
VARIANT_CODES = {"cs": 0, "deblur": 1}


@dataclass
class CheckpointMeta:
    """Geometry needed to rebuild the estimators"""
    variant: str
    input_size: int
    widths: tuple[int, ...]
    kernel_size: int = 0
    share_encoder: bool = False

    def to_tensors(self) -> dict[str, np.ndarray]:
        return {
            "meta/variant": np.asarray(VARIANT_CODES[self.variant]),
            "meta/input_size": np.asarray(self.input_size),
            "meta/widths": np.asarray(self.widths),
            "meta/kernel_size": np.asarray(self.kernel_size),
            "meta/share_encoder": np.asarray(int(self.share_encoder)),
        }

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "CheckpointMeta":
        try:
            code = int(tensors["meta/variant"])
            variant = next(name for name, value in VARIANT_CODES.items() if value == code)
            return cls(
                variant=variant,
                input_size=int(tensors["meta/input_size"]),
                widths=tuple(int(w) for w in np.atleast_1d(tensors["meta/widths"])),
                kernel_size=int(tensors["meta/kernel_size"]),
                share_encoder=bool(int(tensors["meta/share_encoder"])),
            )
        except (KeyError, StopIteration) as e:
            raise CheckpointError(f"Checkpoint metadata incomplete: {str(e)}")


@dataclass
class Checkpoint:
    """Loaded checkpoint: rebuilt models plus the training state to resume from"""
    meta: CheckpointMeta
    f: ImageEstimator
    g: Optional[ParamEstimator]
    state: TrainingState
    phi: Optional[np.ndarray] = None


def meta_for(f: ImageEstimator, g: Optional[ParamEstimator] = None) -> CheckpointMeta:
    return CheckpointMeta(
        variant=f.variant,
        input_size=f.input_size,
        widths=f.widths,
        kernel_size=g.kernel_size if g is not None else 0,
        share_encoder=g.share_encoder if g is not None else False,
    )


def checkpoint_tensors(
    f: ImageEstimator,
    g: Optional[ParamEstimator] = None,
    state: Optional[TrainingState] = None,
    phi: Optional[np.ndarray] = None,
    params: Optional[dict[str, dict[str, np.ndarray]]] = None,
) -> dict[str, np.ndarray]:
    """Flat name -> array map; `params` overrides the live weights (best-epoch snapshots)"""
    params = params or {"f": f.state_dict(), **({"g": g.state_dict()} if g is not None else {})}
    tensors: dict[str, np.ndarray] = {}
    for prefix in ("f", "g"):
        for name in sorted(params.get(prefix, {})):
            tensors[f"{prefix}/{name}"] = params[prefix][name]
    tensors.update(meta_for(f, g).to_tensors())
    if state is not None:
        tensors["meta/step"] = np.asarray(state.step)
        tensors["meta/epoch"] = np.asarray(state.epoch)
        if state.lr is not None:
            tensors["meta/lr"] = np.asarray(state.lr)
        if state.drops_left is not None:
            tensors["meta/drops_left"] = np.asarray(state.drops_left)
            tensors["meta/stale"] = np.asarray(state.stale)
            if state.plateau_best is not None:
                tensors["meta/plateau_best"] = np.asarray(state.plateau_best)
        if state.adam is not None and state.adam.m:
            tensors["meta/adam_step"] = np.asarray(state.adam.step)
            for i, (m, v) in enumerate(zip(state.adam.m, state.adam.v)):
                tensors[f"adam/m/{i:04d}"] = m
                tensors[f"adam/v/{i:04d}"] = v
    if phi is not None:
        tensors["meta/phi"] = phi
    return tensors


def save_checkpoint(path: PathLike, f: ImageEstimator, g: Optional[ParamEstimator] = None, **kwargs) -> Path:
    path = Path(path)
    tensors = checkpoint_tensors(f, g, **kwargs)
    save_tensors(path, tensors)
    logger.info(f"💾 Checkpoint saved: {path} ({len(tensors)} tensors)")
    return path


def _section(tensors: dict[str, np.ndarray], prefix: str) -> dict[str, np.ndarray]:
    start = len(prefix) + 1
    return {name[start:]: value for name, value in tensors.items() if name.startswith(prefix + "/")}


def _adam_state(tensors: dict[str, np.ndarray]) -> Optional[AdamState]:
    moments_m, moments_v = _section(tensors, "adam/m"), _section(tensors, "adam/v")
    if not moments_m:
        return None
    if sorted(moments_m) != sorted(moments_v):
        raise CheckpointError("Adam first and second moments do not match")
    keys = sorted(moments_m)
    return AdamState(
        m=[moments_m[k] for k in keys],
        v=[moments_v[k] for k in keys],
        step=int(tensors.get("meta/adam_step", 0)),
    )


def load_checkpoint(path: PathLike, seed: int = 0) -> Checkpoint:
    """Rebuild f (and g) from a checkpoint file; raises CheckpointError on any mismatch"""
    tensors = load_tensors(path)
    meta = CheckpointMeta.from_tensors(tensors)
    f = ImageEstimator(meta.variant, meta.input_size, widths=meta.widths, seed=seed)
    f.load_state_dict(_section(tensors, "f"))
    g = None
    g_state = _section(tensors, "g")
    if g_state:
        if meta.kernel_size < 3:
            raise CheckpointError("Checkpoint holds kernel estimator weights but no kernel size")
        g = ParamEstimator(f, meta.kernel_size, seed=seed, share_encoder=meta.share_encoder)
        g.load_state_dict(g_state)

    adam = _adam_state(tensors)
    n_params = len(f.parameters()) + (len(g.parameters()) if g is not None else 0)
    if adam is not None:
        if len(adam.m) != n_params:
            raise CheckpointError(f"Adam state holds {len(adam.m)} moments for {n_params} parameters")
        adam.m = [np.asarray(m, dtype=f.dtype) for m in adam.m]
        adam.v = [np.asarray(v, dtype=f.dtype) for v in adam.v]
    state = TrainingState(
        step=int(tensors.get("meta/step", 0)),
        epoch=int(tensors.get("meta/epoch", 0)),
        lr=float(tensors["meta/lr"]) if "meta/lr" in tensors else None,
        adam=adam,
        drops_left=int(tensors["meta/drops_left"]) if "meta/drops_left" in tensors else None,
        plateau_best=float(tensors["meta/plateau_best"]) if "meta/plateau_best" in tensors else None,
        stale=int(tensors.get("meta/stale", 0)),
    )
    phi = tensors.get("meta/phi")
    logger.info(f"📂 Checkpoint loaded: {path} (variant {meta.variant}, step {state.step})")
    return Checkpoint(meta=meta, f=f, g=g, state=state, phi=phi)
