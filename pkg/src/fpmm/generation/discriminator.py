"""Patch discriminator conditioned on the prior map."""

from __future__ import annotations

from typing import Any

import numpy as np

from fpmm.engine.nn import Conv2d, Module
from fpmm.engine.tensor import Tensor, as_tensor, concat
from fpmm.shared.errors import ShapeMismatchError


class Discriminator(Module):
    """Stride-2 convolutions with leaky ReLUs ending in a one-channel grid of patch scores.

    The input is the image with the prior map appended as an extra channel.
    The score head starts at zero, so real and generated frames score alike at
    initialization.
    """

    def __init__(
        self,
        channels: int,
        rng: np.random.Generator,
        *,
        base_channels: int = 16,
        num_layers: int = 3,
        max_channels: int = 128,
        dtype: Any = np.float64,
    ) -> None:
        self.channels = channels
        widths = [channels + 1] + [min(max_channels, base_channels * 2**i) for i in range(num_layers)]
        self.layers = [Conv2d(widths[i], widths[i + 1], 3, rng, stride=2, dtype=dtype) for i in range(num_layers)]
        self.score = Conv2d(widths[-1], 1, 3, rng, zero_init=True, dtype=dtype)

    def forward(self, image: Tensor | np.ndarray, prior: Tensor | np.ndarray) -> Tensor:
        image = as_tensor(image, like=self.score.weight)
        prior = as_tensor(prior, like=self.score.weight)
        if image.ndim != 3 or image.shape[0] != self.channels:
            raise ShapeMismatchError(f"Discriminator expects a {self.channels}×H×W image, got {image.shape}")
        if prior.shape != image.shape[1:]:
            raise ShapeMismatchError(f"Prior map {prior.shape} does not match image {image.shape[1:]}")
        x = concat([image, prior.reshape((1,) + prior.shape)], axis=0)
        for layer in self.layers:
            x = layer(x).leaky_relu()
        return self.score(x)
