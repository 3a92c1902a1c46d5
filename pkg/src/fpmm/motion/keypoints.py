"""Learned keypoint detector on prior-fused frames, and relative keypoint transfer."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from fpmm.engine import functional as F
from fpmm.engine.nn import Conv2d, Hourglass, Module
from fpmm.engine.tensor import Tensor, as_tensor, stack
from fpmm.prior.prior_map import FusedFrame
from fpmm.shared.errors import ShapeMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KeypointSet:
    """K keypoints in normalized ``[-1, 1]²`` coordinates with 2×2 local Jacobians."""

    positions: Tensor  # K×2
    jacobians: Tensor  # K×2×2

    def __post_init__(self) -> None:
        k = self.positions.shape[0]
        if self.positions.shape != (k, 2) or self.jacobians.shape != (k, 2, 2):
            raise ShapeMismatchError(
                f"KeypointSet needs K×2 positions and K×2×2 Jacobians, got {self.positions.shape} and {self.jacobians.shape}"
            )

    @classmethod
    def from_arrays(cls, positions: Any, jacobians: Any = None, dtype: Any = np.float64) -> "KeypointSet":
        positions = np.asarray(positions, dtype=dtype).reshape(-1, 2)
        if jacobians is None:
            jacobians = np.broadcast_to(np.eye(2, dtype=dtype), (len(positions), 2, 2)).copy()
        return cls(Tensor(positions), Tensor(np.asarray(jacobians, dtype=dtype)))

    @property
    def num_keypoints(self) -> int:
        return self.positions.shape[0]

    def detach(self) -> "KeypointSet":
        return KeypointSet(self.positions.detach(), self.jacobians.detach())

    def pixel_positions(self, size: tuple[int, int]) -> np.ndarray:
        return F.normalized_to_pixels(self.positions.data, size)


def inverse_2x2(matrices: Tensor) -> Tensor:
    """Differentiable inverse of a stack of 2×2 matrices (``(..., 2, 2)``)."""
    a = matrices[..., 0, 0]
    b = matrices[..., 0, 1]
    c = matrices[..., 1, 0]
    d = matrices[..., 1, 1]
    det = a * d - b * c
    rows = [stack([d, -b], axis=-1), stack([-c, a], axis=-1)]
    adjugate = stack(rows, axis=-2)
    return adjugate / det.reshape(det.shape + (1, 1))


def transfer_keypoints(driving: KeypointSet, onset: KeypointSet, target: KeypointSet) -> KeypointSet:
    """Carry the motion between ``onset`` and ``driving`` over to ``target``.

    Positions become ``p_T + (p_S - p_onset)``; Jacobians become
    ``J_S · J_onset⁻¹ · J_T``. With ``driving == onset`` the target set is
    returned up to rounding.
    """
    if not driving.num_keypoints == onset.num_keypoints == target.num_keypoints:
        raise ShapeMismatchError("transfer_keypoints: keypoint counts differ")
    positions = target.positions + (driving.positions - onset.positions)
    jacobians = driving.jacobians @ inverse_2x2(onset.jacobians) @ target.jacobians
    return KeypointSet(positions, jacobians)


def gaussian_heatmaps(positions: Tensor, size: tuple[int, int], variance: float) -> Tensor:
    """K×H×W Gaussians ``exp(-|z - p_k|² / (2·variance))`` in normalized coordinates."""
    height, width = size
    grid = F.normalized_grid(height, width, positions.dtype).reshape(1, height, width, 2)
    diff = grid - positions.reshape(positions.shape[0], 1, 1, 2)
    return ((diff * diff).sum(axis=-1) * (-0.5 / variance)).exp()


class KeypointDetector(Module):
    """Hourglass over a (C+1)-channel fused frame emitting K heatmaps and K Jacobians.

    Positions are the soft-argmax of each heatmap. The Jacobian head emits 4
    channels per keypoint, pooled under that keypoint's softmax heatmap and
    added to the identity; the head starts at zero, so an untrained detector
    reports identity Jacobians.
    """

    def __init__(
        self,
        in_channels: int,
        num_keypoints: int,
        rng: np.random.Generator,
        *,
        block_expansion: int = 8,
        num_blocks: int = 3,
        max_features: int = 64,
        temperature: float = 0.1,
        downsample: int = 2,
        dtype: Any = np.float64,
    ) -> None:
        self.in_channels = in_channels
        self.num_keypoints = num_keypoints
        self.temperature = temperature
        self.downsample = downsample
        self.hourglass = Hourglass(
            in_channels, rng, block_expansion=block_expansion, num_blocks=num_blocks, max_features=max_features, dtype=dtype
        )
        self.keypoint_head = Conv2d(self.hourglass.out_channels, num_keypoints, 7, rng, dtype=dtype)
        self.jacobian_head = Conv2d(self.hourglass.out_channels, 4 * num_keypoints, 7, rng, zero_init=True, dtype=dtype)
        self._identity = np.eye(2, dtype=dtype)

    def forward(self, fused: FusedFrame | Tensor | np.ndarray) -> KeypointSet:
        x = as_tensor(fused.data if isinstance(fused, FusedFrame) else fused, like=self.keypoint_head.weight)
        if x.ndim != 3 or x.shape[0] != self.in_channels:
            raise ShapeMismatchError(f"Keypoint detector expects {self.in_channels}×H×W input, got {x.shape}")
        if self.downsample > 1:
            x = F.avg_pool2d(x, self.downsample)
        features = self.hourglass(x)
        k = self.num_keypoints
        _, height, width = features.shape

        heatmaps = F.spatial_softmax(self.keypoint_head(features), self.temperature)
        positions = F.expected_coordinates(heatmaps, normalized=True)

        raw = self.jacobian_head(features).reshape(k, 4, height, width)
        pooled = (raw * heatmaps.reshape(k, 1, height, width)).sum(axis=(2, 3))
        jacobians = pooled.reshape(k, 2, 2) + self._identity
        return KeypointSet(positions, jacobians)


def detect_keypoints(fused: FusedFrame | Tensor | np.ndarray, detector: KeypointDetector) -> KeypointSet:
    return detector(fused)
