"""Numeric core: tensors, spatial ops, reverse-mode gradients, optimizer."""

from fpmm.engine.autograd import check_gradients, gradients
from fpmm.engine.functional import conv2d, sample_bilinear, soft_argmax, warp
from fpmm.engine.tensor import Tensor, as_tensor, concat, stack

__all__ = [
    "Tensor",
    "as_tensor",
    "check_gradients",
    "concat",
    "conv2d",
    "gradients",
    "sample_bilinear",
    "soft_argmax",
    "stack",
    "warp",
]
