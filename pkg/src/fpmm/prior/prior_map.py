"""Region-focusing prior: Gaussian importance map around landmark-derived keypoints.

Each keypoint ``p_k`` contributes a field ``r_ik = exp(-d_ik / (2σ²))`` over
every pixel ``i``, where ``d_ik`` is the Euclidean distance from the pixel to
the keypoint. The fields are summed and min-max normalized; the result is
appended to a frame as an extra channel before keypoint detection.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

from fpmm.schemas.landmarks import LEFT_EYE, RIGHT_EYE, KeypointSpec, LandmarkSet
from fpmm.shared.errors import PriorMapError, ShapeMismatchError

logger = logging.getLogger(__name__)

ExponentForm = Literal["distance", "squared"]

# Degenerate-distance threshold for the pupillary distance (pixels).
_MIN_PUPILLARY_DISTANCE = 1e-9


@dataclass(frozen=True)
class PriorMap:
    """Normalized H×W importance field plus the inputs that produced it."""

    map: np.ndarray
    sigma: float
    source_keypoints: np.ndarray
    exponent_form: ExponentForm = "distance"

    @property
    def size(self) -> tuple[int, int]:
        return self.map.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class FusedFrame:
    """A C×H×W frame with the prior map appended as channel C."""

    data: np.ndarray

    @property
    def channels(self) -> int:
        return self.data.shape[0] - 1

    def frame(self) -> np.ndarray:
        return self.data[:-1]

    def prior(self) -> np.ndarray:
        return self.data[-1]


def eye_centers(landmarks: LandmarkSet) -> tuple[np.ndarray, np.ndarray]:
    """Mean of the six points of the right and left eye, in that order."""
    pts = landmarks.array()
    return pts[list(RIGHT_EYE)].mean(axis=0), pts[list(LEFT_EYE)].mean(axis=0)


def pupillary_distance(landmarks: LandmarkSet) -> float:
    """Euclidean distance between the two eye centers, in pixels."""
    right, left = eye_centers(landmarks)
    distance = float(np.hypot(*(left - right)))
    if distance <= _MIN_PUPILLARY_DISTANCE:
        raise PriorMapError("Pupillary distance is zero: both eye centers coincide")
    return distance


def modify_keypoints(landmarks: LandmarkSet, spec: KeypointSpec) -> np.ndarray:
    """Offset selected landmarks by multiples of half the pupillary distance.

    Returns a K×2 array of pixel points clamped into the image.
    """
    if not spec.entries:
        raise PriorMapError("Keypoint spec is empty: at least one keypoint is required")
    half_pd = pupillary_distance(landmarks) / 2.0
    height, width = landmarks.image_size
    pts = landmarks.array()
    out = np.empty((len(spec.entries), 2), dtype=np.float64)
    for k, entry in enumerate(spec.entries):
        x, y = pts[entry.landmark_index]
        out[k, 0] = np.clip(x + entry.dx_factor * half_pd, 0, width - 1)
        out[k, 1] = np.clip(y + entry.dy_factor * half_pd, 0, height - 1)
    return out


def default_sigma(size: tuple[int, int], exponent_form: ExponentForm = "distance") -> float:
    """σ whose kernel falls to one half at a radius of ``0.1 * min(H, W)`` pixels."""
    radius = 0.1 * min(size)
    if exponent_form == "distance":
        # exp(-R / 2σ²) = 1/2
        return float(np.sqrt(radius / (2.0 * np.log(2.0))))
    # exp(-R² / 2σ²) = 1/2
    return float(radius / np.sqrt(2.0 * np.log(2.0)))


def keypoint_field(
    point: tuple[float, float] | np.ndarray,
    sigma: float,
    size: tuple[int, int],
    exponent_form: ExponentForm = "distance",
) -> np.ndarray:
    """Per-pixel degree of interest ``r_ik`` for one keypoint over an H×W image."""
    if sigma <= 0:
        raise PriorMapError(f"sigma must be > 0, got {sigma}")
    height, width = size
    ys, xs = np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing="ij")
    d = np.sqrt((xs - point[0]) ** 2 + (ys - point[1]) ** 2)
    if exponent_form == "squared":
        d = d * d
    return np.exp(-d / (2.0 * sigma * sigma))


def raw_prior(
    points: np.ndarray,
    sigma: float,
    size: tuple[int, int],
    exponent_form: ExponentForm = "distance",
) -> np.ndarray:
    """Unnormalized sum of the per-keypoint fields."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(points) == 0:
        raise PriorMapError("At least one keypoint is required to synthesize a prior map")
    # Summation in sorted point order keeps the map independent of input order, bit for bit.
    order = np.lexsort((points[:, 1], points[:, 0]))
    total = np.zeros(size, dtype=np.float64)
    for k in order:
        total += keypoint_field(points[k], sigma, size, exponent_form)
    return total


def synthesize_prior(
    points: np.ndarray,
    sigma: float,
    size: tuple[int, int],
    exponent_form: ExponentForm = "distance",
) -> PriorMap:
    """Sum the keypoint fields and min-max normalize the result to ``[0, 1]``."""
    total = raw_prior(points, sigma, size, exponent_form)
    low, high = float(total.min()), float(total.max())
    if high - low <= 0.0:
        raise PriorMapError("Prior map is constant and cannot be normalized")
    normalized = (total - low) / (high - low)
    logger.debug("Prior map over %d keypoints: raw range [%.4g, %.4g]", len(points), low, high)
    return PriorMap(map=normalized, sigma=sigma, source_keypoints=np.asarray(points, dtype=np.float64), exponent_form=exponent_form)


def prior_from_landmarks(
    landmarks: LandmarkSet,
    spec: KeypointSpec,
    size: tuple[int, int],
    *,
    sigma: float | None = None,
    exponent_form: ExponentForm = "distance",
) -> PriorMap:
    """Landmarks → modified keypoints → normalized prior map on an image of ``size``."""
    landmarks = landmarks.rescaled(size)
    points = modify_keypoints(landmarks, spec)
    if sigma is None:
        sigma = default_sigma(size, exponent_form)
    return synthesize_prior(points, sigma, size, exponent_form)


def fuse(frame: np.ndarray, prior: PriorMap | np.ndarray) -> FusedFrame:
    """Append the prior map to a C×H×W frame as channel C."""
    field = prior.map if isinstance(prior, PriorMap) else np.asarray(prior)
    frame = np.asarray(frame)
    if frame.ndim != 3 or field.shape != frame.shape[1:]:
        raise ShapeMismatchError(f"Cannot fuse prior of shape {field.shape} with frame of shape {frame.shape}")
    return FusedFrame(np.concatenate([frame, field[None].astype(frame.dtype)], axis=0))
