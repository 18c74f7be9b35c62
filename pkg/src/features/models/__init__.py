"""Image estimator f and kernel estimator g"""
from .estimators import (
    DEFAULT_WIDTHS,
    ImageEstimator,
    ParamEstimator,
    forward_image,
    forward_kernel,
    kernel_ops,
)
from .layers import EncoderDecoder, LayerSpec, apply_layer, init_params

__all__ = [
    "DEFAULT_WIDTHS",
    "EncoderDecoder",
    "ImageEstimator",
    "LayerSpec",
    "ParamEstimator",
    "apply_layer",
    "forward_image",
    "forward_kernel",
    "init_params",
    "kernel_ops",
]
