"""Region-focusing prior: keypoints from landmarks, Gaussian prior map, channel fusion."""

from fpmm.prior.prior_map import (
    FusedFrame,
    PriorMap,
    default_sigma,
    fuse,
    keypoint_field,
    modify_keypoints,
    prior_from_landmarks,
    pupillary_distance,
    synthesize_prior,
)

__all__ = [
    "FusedFrame",
    "PriorMap",
    "default_sigma",
    "fuse",
    "keypoint_field",
    "modify_keypoints",
    "prior_from_landmarks",
    "pupillary_distance",
    "synthesize_prior",
]
