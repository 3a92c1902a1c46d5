"""Dense motion network: per-pixel soft assignment of K affine flows plus a zero background flow."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from fpmm.engine import functional as F
from fpmm.engine.nn import Conv2d, Hourglass, Module
from fpmm.engine.tensor import Tensor, as_tensor, concat, stack
from fpmm.motion.keypoints import gaussian_heatmaps
from fpmm.motion.sparse import SparseMotion
from fpmm.shared.errors import ShapeMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DenseMotion:
    """Backward flow (H×W×2, pixels), occlusion (H×W) and (K+1)×H×W attention."""

    flow: Tensor
    occlusion: Tensor
    attention: Tensor

    @property
    def size(self) -> tuple[int, int]:
        return self.flow.shape[0], self.flow.shape[1]

    def resized(self, size: tuple[int, int]) -> "DenseMotion":
        """Bilinear resize to ``size``; flow vectors are rescaled to the new pixel pitch."""
        height, width = self.size
        out_h, out_w = size
        if (out_h, out_w) == (height, width):
            return self
        flow = F.resize_bilinear(self.flow.transpose(2, 0, 1), size).transpose(1, 2, 0)
        scale = np.array(
            [
                (out_w - 1) / (width - 1) if width > 1 else 1.0,
                (out_h - 1) / (height - 1) if height > 1 else 1.0,
            ],
            dtype=self.flow.dtype,
        )
        occlusion = F.resize_bilinear(self.occlusion.reshape(1, height, width), size).reshape(out_h, out_w)
        attention = F.resize_bilinear(self.attention, size)
        return DenseMotion(flow=flow * scale, occlusion=occlusion, attention=attention)


def combine(flows: Tensor, attention: Tensor) -> Tensor:
    """Per-pixel mixture of K flows (K×H×W×2) under (K+1)×H×W attention; component 0 is zero flow."""
    k, height, width, _ = flows.shape
    if attention.shape != (k + 1, height, width):
        raise ShapeMismatchError(f"combine: attention {attention.shape} does not match {k} flows of {height}×{width}")
    return (attention[1:].reshape(k, height, width, 1) * flows).sum(axis=0)


class DenseMotionNetwork(Module):
    """Predicts dense motion at ``1/downsample`` resolution from the target frame and sparse motion.

    Input per component (background first, then one per keypoint): the target
    warped by that component's flow plus the heatmap difference
    ``G(p_S) - G(p_T)`` (zero for the background), ``(K+1)·(C+1)`` channels in all.
    Both heads start at zero, giving uniform attention and occlusion 0.5.
    """

    def __init__(
        self,
        channels: int,
        num_keypoints: int,
        rng: np.random.Generator,
        *,
        block_expansion: int = 8,
        num_blocks: int = 3,
        max_features: int = 64,
        downsample: int = 2,
        heatmap_variance: float = 0.01,
        dtype: Any = np.float64,
    ) -> None:
        self.channels = channels
        self.num_keypoints = num_keypoints
        self.downsample = downsample
        self.heatmap_variance = heatmap_variance
        in_features = (num_keypoints + 1) * (channels + 1)
        self.hourglass = Hourglass(
            in_features, rng, block_expansion=block_expansion, num_blocks=num_blocks, max_features=max_features, dtype=dtype
        )
        self.attention_head = Conv2d(self.hourglass.out_channels, num_keypoints + 1, 7, rng, zero_init=True, dtype=dtype)
        self.occlusion_head = Conv2d(self.hourglass.out_channels, 1, 7, rng, zero_init=True, dtype=dtype)

    def motion_size(self, size: tuple[int, int]) -> tuple[int, int]:
        return size[0] // self.downsample, size[1] // self.downsample

    def forward(self, target: Tensor | np.ndarray, sparse: SparseMotion) -> DenseMotion:
        target = as_tensor(target, like=self.attention_head.weight)
        if target.ndim != 3 or target.shape[0] != self.channels:
            raise ShapeMismatchError(f"Dense motion expects a {self.channels}×H×W target, got {target.shape}")
        if sparse.num_keypoints != self.num_keypoints:
            raise ShapeMismatchError(f"Dense motion built for {self.num_keypoints} keypoints, got {sparse.num_keypoints}")
        k = self.num_keypoints
        small = F.avg_pool2d(target, self.downsample) if self.downsample > 1 else target
        _, height, width = small.shape

        flows = sparse.flows((height, width))
        warped = stack([small] + [F.warp(small, flows[i]) for i in range(k)], axis=0)

        heat = gaussian_heatmaps(sparse.driving.positions, (height, width), self.heatmap_variance) - gaussian_heatmaps(
            sparse.target.positions, (height, width), self.heatmap_variance
        )
        background = np.zeros((1, height, width), dtype=heat.dtype)
        heat = concat([as_tensor(background, like=heat), heat], axis=0).reshape(k + 1, 1, height, width)

        features = concat([heat, warped], axis=1).reshape((k + 1) * (self.channels + 1), height, width)
        hidden = self.hourglass(features)

        attention = F.softmax(self.attention_head(hidden), axis=0)
        occlusion = self.occlusion_head(hidden).reshape(height, width).sigmoid()
        flow = combine(flows, attention)
        return DenseMotion(flow=flow, occlusion=occlusion, attention=attention)


def predict_dense(target: Tensor | np.ndarray, sparse: SparseMotion, network: DenseMotionNetwork) -> DenseMotion:
    return network(target, sparse)
