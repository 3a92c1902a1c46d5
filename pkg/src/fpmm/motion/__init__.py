"""Motion prediction: keypoint detection, first-order sparse motion, dense flow and occlusion."""

from fpmm.motion.dense import DenseMotion, DenseMotionNetwork, combine, predict_dense
from fpmm.motion.keypoints import KeypointDetector, KeypointSet, detect_keypoints, transfer_keypoints
from fpmm.motion.sparse import SparseMotion, compose_sparse, exact_affine_flow

__all__ = [
    "DenseMotion",
    "DenseMotionNetwork",
    "KeypointDetector",
    "KeypointSet",
    "SparseMotion",
    "combine",
    "compose_sparse",
    "detect_keypoints",
    "exact_affine_flow",
    "predict_dense",
    "transfer_keypoints",
]
