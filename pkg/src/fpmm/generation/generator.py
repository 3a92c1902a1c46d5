"""Occlusion-aware generator: encode, warp features, mask, decode."""

from __future__ import annotations

from typing import Any

import numpy as np

from fpmm.engine import functional as F
from fpmm.engine.nn import Conv2d, DownBlock, Module, ResBlock, SameBlock, UpBlock
from fpmm.engine.tensor import Tensor, as_tensor
from fpmm.motion.dense import DenseMotion
from fpmm.shared.errors import ShapeMismatchError

# The encoder halves the resolution this many times.
ENCODER_DOWNSAMPLES = 2


class Generator(Module):
    """Auto-encoder with a residual trunk; motion is applied to the encoded features."""

    def __init__(
        self,
        channels: int,
        rng: np.random.Generator,
        *,
        base_channels: int = 16,
        residual_blocks: int = 2,
        dtype: Any = np.float64,
    ) -> None:
        self.channels = channels
        widths = [base_channels * 2**i for i in range(ENCODER_DOWNSAMPLES + 1)]
        self.first = SameBlock(channels, widths[0], rng, kernel_size=7, dtype=dtype)
        self.down = [DownBlock(widths[i], widths[i + 1], rng, dtype=dtype) for i in range(ENCODER_DOWNSAMPLES)]
        self.trunk = [ResBlock(widths[-1], rng, dtype=dtype) for _ in range(residual_blocks)]
        self.up = [UpBlock(widths[i + 1], widths[i], rng, dtype=dtype) for i in reversed(range(ENCODER_DOWNSAMPLES))]
        self.final = Conv2d(widths[0], channels, 7, rng, dtype=dtype)

    @staticmethod
    def feature_size(size: tuple[int, int]) -> tuple[int, int]:
        factor = 2**ENCODER_DOWNSAMPLES
        return size[0] // factor, size[1] // factor

    def encode(self, image: Tensor | np.ndarray) -> Tensor:
        x = as_tensor(image, like=self.final.weight)
        if x.ndim != 3 or x.shape[0] != self.channels:
            raise ShapeMismatchError(f"Generator expects a {self.channels}×H×W image, got {x.shape}")
        x = self.first(x)
        for block in self.down:
            x = block(x)
        return x

    def decode(self, features: Tensor) -> Tensor:
        x = features
        for block in self.trunk:
            x = block(x)
        for block in self.up:
            x = block(x)
        return self.final(x).sigmoid()

    def autoencode(self, image: Tensor | np.ndarray) -> Tensor:
        return self.decode(self.encode(image))

    def forward(self, target: Tensor | np.ndarray, motion: DenseMotion | None = None) -> Tensor:
        features = self.encode(target)
        if motion is None:
            return self.decode(features)
        _, height, width = features.shape
        if motion.size != (height, width):
            raise ShapeMismatchError(
                f"Dense motion is {motion.size[0]}×{motion.size[1]} but encoder features are {height}×{width}"
            )
        features = F.warp(features, motion.flow)
        features = features * motion.occlusion.reshape(1, height, width)
        return self.decode(features)


def generate_frame(target: Tensor | np.ndarray, motion: DenseMotion, generator: Generator) -> Tensor:
    """Render the target under ``motion``, which must already be at encoder resolution."""
    return generator(target, motion)
