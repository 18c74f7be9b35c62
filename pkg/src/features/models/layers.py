"""
Layer specs, parameter initialization and encoder-decoder blocks.

Weights are stored in a flat dict keyed "<layer>/weight" and "<layer>/bias".
conv weights are (out, in, k, k); upconv weights use the layout of the conv
they are the adjoint of, i.e. (in, out, k, k).
"""
import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from ...shared.exceptions import ShapeMismatchError
from ...shared.rng import stream
from ..tensor_core import Tensor, add, concat, conv2d, conv2d_transpose, parameter, relu

logger = logging.getLogger(__name__)

LayerKind = Literal["conv", "upconv"]
Activation = Literal["relu", "linear"]
Params = dict[str, Tensor]


@dataclass(frozen=True)
class LayerSpec:
    """One convolution layer"""
    name: str
    kind: LayerKind
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: str = "same"
    activation: Activation = "relu"
    zero_init: bool = False

    @property
    def fan_in(self) -> int:
        return self.in_channels * self.kernel * self.kernel

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        if self.kind == "conv":
            return (self.out_channels, self.in_channels, self.kernel, self.kernel)
        return (self.in_channels, self.out_channels, self.kernel, self.kernel)


def init_params(specs: Sequence[LayerSpec], seed: int, dtype=np.float32) -> Params:
    """Fan-in scaled uniform weights (variance 2 / fan_in) and zero biases"""
    params: Params = {}
    for spec in specs:
        if spec.zero_init:
            weight = np.zeros(spec.weight_shape)
        else:
            bound = np.sqrt(6.0 / spec.fan_in)
            weight = stream(seed, "init", spec.name).uniform(-bound, bound, size=spec.weight_shape)
        params[f"{spec.name}/weight"] = parameter(weight, name=f"{spec.name}/weight", dtype=dtype)
        params[f"{spec.name}/bias"] = parameter(np.zeros((spec.out_channels, 1, 1)), name=f"{spec.name}/bias", dtype=dtype)
    return params


def apply_layer(
    params: Params, spec: LayerSpec, x: Tensor, output_size: Optional[tuple[int, int]] = None
) -> Tensor:
    weight, bias = params[f"{spec.name}/weight"], params[f"{spec.name}/bias"]
    if spec.kind == "conv":
        out = conv2d(x, weight, stride=spec.stride, padding=spec.padding)
    else:
        out = conv2d_transpose(x, weight, stride=spec.stride, padding=spec.padding, output_size=output_size)
    out = add(out, bias)
    return relu(out) if spec.activation == "relu" else out


class EncoderDecoder:
    """
    U-Net style block: strided-conv encoder, transposed-conv decoder with skip
    concatenations at every level.

    downsample_first=False keeps a full-resolution first level (patch inputs);
    downsample_first=True halves the resolution at every encoder layer and
    restores it with a final transposed conv (image inputs).
    """

    def __init__(self, prefix: str, in_channels: int, out_channels: int, widths: Sequence[int], downsample_first: bool):
        if len(widths) < 2:
            raise ShapeMismatchError(f"Encoder-decoder needs at least two levels, got widths {tuple(widths)}")
        self.prefix = prefix
        self.widths = tuple(int(w) for w in widths)
        self.downsample_first = downsample_first
        self.encoder: list[LayerSpec] = []
        self.decoder: list[tuple[LayerSpec, LayerSpec]] = []

        channels = in_channels
        for level, width in enumerate(self.widths):
            if level == 0 and not downsample_first:
                self.encoder.append(LayerSpec(f"{prefix}.enc0", "conv", channels, width, 3))
            else:
                self.encoder.append(LayerSpec(f"{prefix}.enc{level}", "conv", channels, width, 4, stride=2))
            channels = width

        for level in range(len(self.widths) - 1, 0, -1):
            below = self.widths[level - 1]
            up = LayerSpec(f"{prefix}.up{level}", "upconv", self.widths[level], below, 4, stride=2)
            merge = LayerSpec(f"{prefix}.merge{level}", "conv", 2 * below, below, 3)
            self.decoder.append((up, merge))

        if downsample_first:
            self.head = [LayerSpec(f"{prefix}.out", "upconv", self.widths[0], out_channels, 4, stride=2, activation="linear")]
        else:
            self.head = [
                LayerSpec(f"{prefix}.end", "conv", self.widths[0], self.widths[0], 3),
                LayerSpec(f"{prefix}.out", "conv", self.widths[0], out_channels, 1, activation="linear"),
            ]

    @property
    def specs(self) -> list[LayerSpec]:
        return self.encoder + [layer for pair in self.decoder for layer in pair] + self.head

    @property
    def downsampling(self) -> int:
        """Total spatial reduction of the encoder"""
        steps = len(self.widths) if self.downsample_first else len(self.widths) - 1
        return 2**steps

    def encode(self, params: Params, x: Tensor) -> list[Tensor]:
        """Encoder features, finest first"""
        features = []
        for spec in self.encoder:
            x = apply_layer(params, spec, x)
            features.append(x)
        return features

    def decode(self, params: Params, features: list[Tensor], output_size: tuple[int, int]) -> Tensor:
        x = features[-1]
        for (up, merge), skip in zip(self.decoder, reversed(features[:-1])):
            x = apply_layer(params, up, x, output_size=skip.shape[-2:])
            x = apply_layer(params, merge, concat([x, skip], axis=1))
        for spec in self.head:
            x = apply_layer(params, spec, x, output_size=output_size if spec.kind == "upconv" else None)
        return x

    def forward(self, params: Params, x: Tensor) -> tuple[Tensor, list[Tensor]]:
        features = self.encode(params, x)
        return self.decode(params, features, tuple(x.shape[-2:])), features
