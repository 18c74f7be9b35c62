"""
Image estimator f and kernel estimator g.

f (cs): two stacked encoder-decoders on theta^T y patches; the second sees the
input and the first output, and the two outputs are summed.
f (deblur): one encoder-decoder on the blurry image.
g: a separate decoder path from f's bottleneck that grows the feature map to
K x K and ends in a spatial softmax, so every estimate is a valid kernel.
"""
import logging
from typing import Literal, Optional, Sequence, Union

import numpy as np

from ...shared.exceptions import CheckpointError, ShapeMismatchError
from ..measurement.operators import Boundary, ConvolutionOp
from ..tensor_core import Tensor, add, concat, getitem, reshape, spatial_softmax, stop_gradient
from .layers import EncoderDecoder, LayerSpec, Params, apply_layer, init_params

logger = logging.getLogger(__name__)

Variant = Literal["cs", "deblur"]
VARIANTS: tuple[str, ...] = ("cs", "deblur")
DEFAULT_WIDTHS = {"cs": (16, 32, 64), "deblur": (16, 32, 64, 64)}


def _count(params: Params) -> int:
    return int(sum(p.size for p in params.values()))


class _Module:
    """Named parameter dict with state_dict round-tripping"""

    params: Params

    def parameters(self) -> list[Tensor]:
        return [self.params[name] for name in sorted(self.params)]

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [(name, self.params[name]) for name in sorted(self.params)]

    @property
    def parameter_count(self) -> int:
        return _count(self.params)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = sorted(set(self.params) - set(state))
        unexpected = sorted(set(state) - set(self.params))
        if missing or unexpected:
            raise CheckpointError(f"State mismatch: missing {missing[:5]}, unexpected {unexpected[:5]}")
        for name, value in state.items():
            target = self.params[name]
            if tuple(value.shape) != target.shape:
                raise CheckpointError(f"Parameter {name}: stored {tuple(value.shape)}, model {target.shape}")
            target.data = np.array(value, dtype=target.dtype)


class ImageEstimator(_Module):
    """f: network input (N, 1, s, s) -> prediction (N, 1, s, s)"""

    def __init__(
        self,
        variant: Variant,
        input_size: int,
        widths: Optional[Sequence[int]] = None,
        seed: int = 0,
        dtype=np.float32,
    ):
        if variant not in VARIANTS:
            raise ShapeMismatchError(f"Unknown image estimator variant {variant!r}")
        self.variant = variant
        self.input_size = int(input_size)
        self.dtype = np.dtype(dtype)
        self.widths = tuple(widths or DEFAULT_WIDTHS[variant])
        if variant == "cs":
            self.blocks = [
                EncoderDecoder("unet1", 1, 1, self.widths, downsample_first=False),
                EncoderDecoder("unet2", 2, 1, self.widths, downsample_first=False),
            ]
        else:
            self.blocks = [EncoderDecoder("unet", 1, 1, self.widths, downsample_first=True)]
        factor = self.blocks[0].downsampling
        if self.input_size % factor:
            raise ShapeMismatchError(
                f"Input size {self.input_size} is not divisible by the encoder downsampling {factor}"
            )
        self.specs: list[LayerSpec] = [spec for block in self.blocks for spec in block.specs]
        self.params = init_params(self.specs, seed, dtype=dtype)
        logger.info(f"🧠 Image estimator ({variant}, widths {self.widths}): {self.parameter_count:,} parameters")

    @property
    def input_shape(self) -> tuple[int, int]:
        return (self.input_size, self.input_size)

    def check_input(self, x: Tensor) -> None:
        if x.ndim != 4 or x.shape[1] != 1 or tuple(x.shape[-2:]) != self.input_shape:
            raise ShapeMismatchError(f"Image estimator expects (N, 1, {self.input_size}, {self.input_size}), got {x.shape}")

    def forward_with_features(self, x: Tensor) -> tuple[Tensor, list[Tensor]]:
        """Prediction and the first block's encoder features"""
        self.check_input(x)
        first, features = self.blocks[0].forward(self.params, x)
        if self.variant == "cs":
            second, _ = self.blocks[1].forward(self.params, concat([x, first], axis=1))
            return add(first, second), features
        return first, features

    def forward(self, x: Tensor) -> Tensor:
        return self.forward_with_features(x)[0]

    __call__ = forward


class ParamEstimator(_Module):
    """g: decoder head on f's encoder features -> (N, K, K) kernels"""

    def __init__(self, image_estimator: ImageEstimator, kernel_size: int, seed: int = 0, share_encoder: bool = False):
        if image_estimator.variant != "deblur":
            raise ShapeMismatchError("The kernel estimator attaches to the deblur image estimator")
        if kernel_size < 3 or kernel_size % 2 == 0:
            raise ShapeMismatchError(f"Kernel size must be odd and >= 3, got {kernel_size}")
        self.image_estimator = image_estimator
        self.kernel_size = int(kernel_size)
        self.share_encoder = share_encoder

        widths = image_estimator.widths
        block = image_estimator.blocks[0]
        bottleneck, skip = widths[-1], widths[-2]
        size = image_estimator.input_size // block.downsampling * 2
        self.skip_size = size

        specs = [LayerSpec("kup0", "upconv", bottleneck, skip, 4, stride=2)]
        channels = 2 * skip
        index = 1
        while size != self.kernel_size:
            if size < self.kernel_size:
                specs.append(LayerSpec(f"kup{index}", "upconv", channels, skip, 2, padding="valid"))
                size += 1
            else:
                specs.append(LayerSpec(f"kdown{index}", "conv", channels, skip, 2, padding="valid"))
                size -= 1
            channels = skip
            index += 1
        specs.append(LayerSpec("kout", "conv", channels, 1, 1, activation="linear", zero_init=True))
        self.specs = specs
        self.params = init_params(specs, seed, dtype=image_estimator.dtype)
        logger.info(f"🧠 Kernel estimator ({self.kernel_size}x{self.kernel_size}): {self.parameter_count:,} parameters")

    def forward_features(self, features: list[Tensor]) -> Tensor:
        """Kernels from encoder features of f"""
        if not self.share_encoder:
            features = [stop_gradient(f) for f in features]
        bottleneck, skip = features[-1], features[-2]
        x = apply_layer(self.params, self.specs[0], bottleneck, output_size=tuple(skip.shape[-2:]))
        x = concat([x, skip], axis=1)
        for spec in self.specs[1:]:
            x = apply_layer(self.params, spec, x)
        kernels = spatial_softmax(x)
        return reshape(kernels, (kernels.shape[0], self.kernel_size, self.kernel_size))

    def forward(self, y: Tensor) -> Tensor:
        _, features = self.image_estimator.forward_with_features(y)
        return self.forward_features(features)

    __call__ = forward


# ==========================================
# OPERATIONS
# ==========================================

def forward_image(f: ImageEstimator, net_input: Union[Tensor, np.ndarray]) -> Tensor:
    """f(net_input) with net_input = theta^T y patches (cs) or blurry images (deblur)"""
    x = net_input if isinstance(net_input, Tensor) else Tensor(np.asarray(net_input, dtype=f.dtype))
    if x.ndim == 2:
        x = reshape(x, (1, 1) + tuple(x.shape))
    return f.forward(x)


def kernel_ops(
    kernels: Tensor,
    image_shape: tuple[int, int],
    boundary: Boundary = "zero",
    live: bool = False,
) -> list[ConvolutionOp]:
    """Wrap estimated kernels as blur operators; live ops differentiate into g"""
    ops = []
    for i in range(kernels.shape[0]):
        kernel = np.asarray(kernels.data[i], dtype=np.float64)
        kernel = kernel / kernel.sum()
        tensor = getitem(kernels, i) if live else None
        ops.append(ConvolutionOp(kernel, image_shape, boundary=boundary, kernel_tensor=tensor))
    return ops


def forward_kernel(
    g: ParamEstimator, y: Union[Tensor, np.ndarray], boundary: Boundary = "zero", live: bool = False
) -> list[ConvolutionOp]:
    """theta_hat = g(y), one ConvolutionOp per blurry image"""
    x = y if isinstance(y, Tensor) else Tensor(np.asarray(y, dtype=g.image_estimator.dtype))
    if x.ndim == 2:
        x = reshape(x, (1, 1) + tuple(x.shape))
    return kernel_ops(g.forward(x), tuple(x.shape[-2:]), boundary=boundary, live=live)
