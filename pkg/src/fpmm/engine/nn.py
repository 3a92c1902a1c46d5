"""Parameter containers and the convolutional building blocks shared by every network."""

from __future__ import annotations

from collections.abc import Iterator
from typing import Any

import numpy as np

from fpmm.engine import functional as F
from fpmm.engine.tensor import Tensor, concat


def xavier_uniform(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int, dtype: Any
) -> np.ndarray:
    """Uniform in ``[-a, a]`` with ``a = sqrt(6 / (fan_in + fan_out))``."""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Module:
    """Base class: every ``Tensor`` attribute is a parameter, every ``Module`` attribute a child.

    Names are dotted attribute paths (``hourglass.down.0.conv.weight``) in
    attribute definition order, so iteration order is stable.
    """

    def forward(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.forward(*args, **kwargs)

    def named_tensors(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_tensors(f"{full}.")
            elif isinstance(value, (list, tuple)) and value and all(isinstance(v, Module) for v in value):
                for i, child in enumerate(value):
                    yield from child.named_tensors(f"{full}.{i}.")

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        """Trainable tensors only."""
        return [(n, t) for n, t in self.named_tensors(prefix) if t.requires_grad]

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(t.size for _, t in self.named_tensors())

    def freeze(self) -> None:
        for _, t in self.named_tensors():
            t.requires_grad = False


class Conv2d(Module):
    """Odd-kernel convolution with 'same' padding unless ``stride`` > 1."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        *,
        stride: int = 1,
        zero_init: bool = False,
        dtype: Any = np.float64,
    ) -> None:
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        if zero_init:
            data = np.zeros(shape, dtype=dtype)
        else:
            receptive = kernel_size * kernel_size
            data = xavier_uniform(rng, shape, in_channels * receptive, out_channels * receptive, dtype)
        self.weight = Tensor(data, requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)
        self.stride = stride
        self.padding = kernel_size // 2

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class SameBlock(Module):
    """Convolution followed by a leaky ReLU at unchanged resolution."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, *, kernel_size: int = 3, dtype: Any = np.float64) -> None:
        self.conv = Conv2d(in_channels, out_channels, kernel_size, rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return self.conv(x).leaky_relu()


class DownBlock(Module):
    """Convolution, leaky ReLU, then 2×2 average pooling."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, *, dtype: Any = np.float64) -> None:
        self.conv = Conv2d(in_channels, out_channels, 3, rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return F.avg_pool2d(self.conv(x).leaky_relu(), 2)


class UpBlock(Module):
    """Nearest ×2 upsampling, convolution, leaky ReLU."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, *, dtype: Any = np.float64) -> None:
        self.conv = Conv2d(in_channels, out_channels, 3, rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return self.conv(F.upsample_nearest(x, 2)).leaky_relu()


class ResBlock(Module):
    """Two 3×3 convolutions with an identity shortcut."""

    def __init__(self, channels: int, rng: np.random.Generator, *, dtype: Any = np.float64) -> None:
        self.conv1 = Conv2d(channels, channels, 3, rng, dtype=dtype)
        self.conv2 = Conv2d(channels, channels, 3, rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        out = self.conv1(x.leaky_relu())
        out = self.conv2(out.leaky_relu())
        return x + out


class Hourglass(Module):
    """U-shaped encoder/decoder with skip connections.

    Output has ``block_expansion + in_features`` channels at input resolution;
    the input must be divisible by ``2 ** num_blocks``.
    """

    def __init__(
        self,
        in_features: int,
        rng: np.random.Generator,
        *,
        block_expansion: int,
        num_blocks: int,
        max_features: int,
        dtype: Any = np.float64,
    ) -> None:
        def width(i: int) -> int:
            return min(max_features, block_expansion * (2**i))

        self.down = [
            DownBlock(in_features if i == 0 else width(i), width(i + 1), rng, dtype=dtype)
            for i in range(num_blocks)
        ]
        self.up = [
            UpBlock((1 if i == num_blocks - 1 else 2) * width(i + 1), width(i), rng, dtype=dtype)
            for i in reversed(range(num_blocks))
        ]
        self.out_channels = block_expansion + in_features

    def forward(self, x: Tensor) -> Tensor:
        skips = [x]
        for block in self.down:
            skips.append(block(skips[-1]))
        out = skips.pop()
        for block in self.up:
            out = block(out)
            out = concat([out, skips.pop()], axis=0)
        return out
