"""First-order sparse motion: one local affine map per keypoint, factored through a reference frame.

For keypoint k the backward map from driving-frame coordinates to target
coordinates is::

    A_k(z) = p_T + J_T · J_S⁻¹ · (z - p_S)

i.e. driving → reference (``J_S⁻¹ (z - p_S)``) followed by reference → target.
All maps act on normalized coordinates; :meth:`SparseMotion.flows` converts
them to backward flows in pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fpmm.engine import functional as F
from fpmm.engine.tensor import Tensor, as_tensor
from fpmm.motion.keypoints import KeypointSet, inverse_2x2
from fpmm.shared.errors import ShapeMismatchError, SingularJacobianError

# Driving Jacobians with |det| at or below this cannot be inverted.
MIN_JACOBIAN_DET = 1e-6


@dataclass(frozen=True)
class SparseMotion:
    """K affine maps ``z ↦ matrix_k · z + offset_k`` plus the keypoints they came from."""

    matrix: Tensor  # K×2×2
    offset: Tensor  # K×2
    target: KeypointSet
    driving: KeypointSet

    @property
    def num_keypoints(self) -> int:
        return self.matrix.shape[0]

    def apply(self, points: Tensor | np.ndarray) -> Tensor:
        """Map ``P×2`` normalized points through every A_k; returns ``K×P×2``."""
        points = as_tensor(points, like=self.matrix)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ShapeMismatchError(f"SparseMotion.apply expects P×2 points, got {points.shape}")
        k = self.num_keypoints
        mapped = points.reshape(1, points.shape[0], 2) @ self.matrix.transpose(0, 2, 1)
        return mapped + self.offset.reshape(k, 1, 2)

    def flows(self, size: tuple[int, int]) -> Tensor:
        """K×H×W×2 backward flows in pixels, one per keypoint."""
        height, width = size
        dtype = self.matrix.dtype
        grid = F.normalized_grid(height, width, dtype).reshape(-1, 2)
        mapped = self.apply(grid)
        scale = np.array([(width - 1) / 2.0, (height - 1) / 2.0], dtype=dtype)
        pixels = (mapped + 1.0) * scale
        flow = pixels - F.pixel_grid(height, width, dtype).reshape(1, -1, 2)
        return flow.reshape(self.num_keypoints, height, width, 2)


def compose_sparse(target_kp: KeypointSet, driving_kp: KeypointSet) -> SparseMotion:
    """Build the per-keypoint affine maps from driving-frame to target coordinates.

    Raises ``SingularJacobianError`` naming the first keypoint whose driving
    Jacobian has ``|det| <= 1e-6``.
    """
    if target_kp.num_keypoints != driving_kp.num_keypoints:
        raise ShapeMismatchError(
            f"compose_sparse: {target_kp.num_keypoints} target vs {driving_kp.num_keypoints} driving keypoints"
        )
    j = driving_kp.jacobians.data
    dets = j[:, 0, 0] * j[:, 1, 1] - j[:, 0, 1] * j[:, 1, 0]
    for k, det in enumerate(dets):
        if abs(det) <= MIN_JACOBIAN_DET:
            raise SingularJacobianError(k, float(det))

    k = target_kp.num_keypoints
    matrix = target_kp.jacobians @ inverse_2x2(driving_kp.jacobians)
    moved = (matrix @ driving_kp.positions.reshape(k, 2, 1)).reshape(k, 2)
    offset = target_kp.positions - moved
    return SparseMotion(matrix=matrix, offset=offset, target=target_kp, driving=driving_kp)


# ----------------------------------------------------------------------
# Exact affine flows (pixel space)
# ----------------------------------------------------------------------


def exact_affine_flow(affine: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """H×W×2 backward flow realizing the 2×3 pixel-space map ``z ↦ A[:, :2] z + A[:, 2]``."""
    affine = np.asarray(affine, dtype=np.float64)
    if affine.shape != (2, 3):
        raise ShapeMismatchError(f"exact_affine_flow expects a 2×3 matrix, got {affine.shape}")
    grid = F.pixel_grid(*size)
    return grid @ affine[:, :2].T + affine[:, 2] - grid


def pixel_to_normalized_affine(affine: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Express a 2×3 pixel-space affine map in normalized coordinates."""
    height, width = size
    affine = np.asarray(affine, dtype=np.float64)
    # z_n = S z_p + t
    s = np.diag([2.0 / (width - 1), 2.0 / (height - 1)])
    t = np.array([-1.0, -1.0])
    s_inv = np.linalg.inv(s)
    linear = s @ affine[:, :2] @ s_inv
    offset = s @ (affine[:, 2] - affine[:, :2] @ s_inv @ t) + t
    return np.concatenate([linear, offset[:, None]], axis=1)


def keypoints_for_affine(
    affine: np.ndarray,
    points: np.ndarray,
    size: tuple[int, int],
) -> tuple[KeypointSet, KeypointSet]:
    """Oracle (target, driving) keypoint sets whose every A_k equals one global pixel affine.

    ``points`` are driving-frame positions in pixels.
    """
    normalized = pixel_to_normalized_affine(affine, size)
    linear, shift = normalized[:, :2], normalized[:, 2]
    driving_positions = F.pixels_to_normalized(points, size)
    target_positions = driving_positions @ linear.T + shift
    k = len(driving_positions)
    target_jacobians = np.broadcast_to(linear, (k, 2, 2)).copy()
    return KeypointSet.from_arrays(target_positions, target_jacobians), KeypointSet.from_arrays(driving_positions)
