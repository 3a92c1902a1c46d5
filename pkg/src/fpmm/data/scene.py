"""Synthetic face scenes with exact 68-point landmark ground truth.

The face is a filled head ellipse with a smooth seeded skin texture, drawn
over a flat background; brows, eyes, nose, mouth and jaw are anti-aliased
strokes through their landmarks. A part's timeline displacement moves its
landmarks and its strokes by exactly that offset; a ``head`` displacement
moves everything, texture included.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from fpmm.engine import functional as F
from fpmm.engine.tensor import Tensor
from fpmm.schemas.landmarks import JAW, LEFT_BROW, LEFT_EYE, MOUTH, NOSE, NUM_LANDMARKS, RIGHT_BROW, RIGHT_EYE, LandmarkSet
from fpmm.schemas.scene import PARTS, FaceParams, PartDisplacement, SceneScript

logger = logging.getLogger(__name__)

PART_LANDMARKS: dict[str, range] = {
    "jaw": JAW,
    "right_brow": RIGHT_BROW,
    "left_brow": LEFT_BROW,
    "nose": NOSE,
    "right_eye": RIGHT_EYE,
    "left_eye": LEFT_EYE,
    "mouth": MOUTH,
}

# Polylines drawn per part: (first index, last index, closed).
_STROKES: dict[str, list[tuple[int, int, bool]]] = {
    "jaw": [(0, 16, False)],
    "right_brow": [(17, 21, False)],
    "left_brow": [(22, 26, False)],
    "nose": [(27, 30, False), (31, 35, False)],
    "right_eye": [(36, 41, True)],
    "left_eye": [(42, 47, True)],
    "mouth": [(48, 59, True), (60, 67, True)],
}

_TEXTURE_CELLS = 8


@dataclass(frozen=True)
class RenderedScene:
    """Frames (C×H×W in [0, 1]) and their landmarks, frame 1 first."""

    frames: list[np.ndarray]
    landmarks: list[LandmarkSet]


# ----------------------------------------------------------------------
# Geometry
# ----------------------------------------------------------------------


def _eye_points(cx: float, cy: float, rx: float, ry: float) -> np.ndarray:
    # outer corner, two upper, inner corner, two lower; centroid is exactly (cx, cy)
    angles = np.array([np.pi, 2 * np.pi / 3, np.pi / 3, 0.0, -np.pi / 3, -2 * np.pi / 3])
    return np.stack([cx + rx * np.cos(angles), cy - ry * np.sin(angles)], axis=-1)


def _ring(cx: float, cy: float, rx: float, ry: float, count: int) -> np.ndarray:
    angles = np.pi - np.arange(count) * (2 * np.pi / count)
    return np.stack([cx + rx * np.cos(angles), cy - ry * np.sin(angles)], axis=-1)


def base_landmarks(face: FaceParams, size: tuple[int, int]) -> np.ndarray:
    """68×2 landmark positions of the undisplaced face, in pixels."""
    height, width = size
    pts = np.zeros((NUM_LANDMARKS, 2))
    cx, cy = face.head_center[0] * width, face.head_center[1] * height
    rx, ry = face.head_radii[0] * width, face.head_radii[1] * height

    t = np.linspace(np.pi, 0.0, len(JAW))
    pts[JAW.start : JAW.stop] = np.stack([cx + 0.96 * rx * np.cos(t), cy + 0.96 * ry * np.sin(t)], axis=-1)

    spacing = face.eye_spacing * width
    brow_half = face.brow_width * width / 2
    u = np.linspace(-1.0, 1.0, 5)
    for brow, sign in ((RIGHT_BROW, -1), (LEFT_BROW, 1)):
        bx = cx + sign * spacing + u * brow_half
        by = face.brow_y * height - face.brow_arch * height * (1 - u * u)
        pts[brow.start : brow.stop] = np.stack([bx, by], axis=-1)

    nose_top, nose_tip = face.nose_top * height, face.nose_tip * height
    pts[27:31] = np.stack([np.full(4, cx), np.linspace(nose_top, nose_tip, 4)], axis=-1)
    nw = face.nose_width * width
    base_y = nose_tip + 0.02 * height
    pts[31:36] = np.stack([cx + np.linspace(-nw, nw, 5), base_y + np.array([0, 0.4, 0.6, 0.4, 0]) * 0.02 * height], axis=-1)

    ex, ey = face.eye_radii[0] * width, face.eye_radii[1] * height
    eye_y = face.eye_y * height
    pts[RIGHT_EYE.start : RIGHT_EYE.stop] = _eye_points(cx - spacing, eye_y, ex, ey)
    pts[LEFT_EYE.start : LEFT_EYE.stop] = _eye_points(cx + spacing, eye_y, ex, ey)

    mx, my = face.mouth_radii[0] * width, face.mouth_radii[1] * height
    mouth_y = face.mouth_y * height
    pts[48:60] = _ring(cx, mouth_y, mx, my, 12)
    pts[60:68] = _ring(cx, mouth_y, 0.7 * mx, 0.4 * my, 8)
    return pts


def eye_centers(face: FaceParams, size: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Scripted (right, left) eye centers of the undisplaced face, in pixels."""
    height, width = size
    cx = face.head_center[0] * width
    y = face.eye_y * height
    spacing = face.eye_spacing * width
    return np.array([cx - spacing, y]), np.array([cx + spacing, y])


def frame_landmarks(script: SceneScript, frame: int) -> np.ndarray:
    """68×2 landmark positions at ``frame`` (1-based)."""
    pts = base_landmarks(script.face, script.size)
    for part, indices in PART_LANDMARKS.items():
        dx, dy = script.displacement(part, frame)
        pts[indices.start : indices.stop] += (dx, dy)
    hx, hy = script.displacement("head", frame)
    pts += (hx, hy)
    return pts


# ----------------------------------------------------------------------
# Rasterization
# ----------------------------------------------------------------------


def _segment_distance(grid: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    ap = grid - a
    t = np.clip((ap @ ab) / denom, 0.0, 1.0) if denom > 0 else np.zeros(grid.shape[:-1])
    closest = a + t[..., None] * ab
    return np.hypot(*(grid - closest).transpose(2, 0, 1))


def _polyline_coverage(grid: np.ndarray, points: np.ndarray, closed: bool, half_width: float) -> np.ndarray:
    pairs = list(zip(points[:-1], points[1:]))
    if closed:
        pairs.append((points[-1], points[0]))
    dist = np.min([_segment_distance(grid, a, b) for a, b in pairs], axis=0)
    return np.clip(half_width + 0.5 - dist, 0.0, 1.0)


def _texture(script: SceneScript) -> np.ndarray:
    """Smooth 1×H×W noise field in [-1, 1], fixed by the script seed."""
    rng = np.random.default_rng(script.seed)
    cells = rng.uniform(-1.0, 1.0, size=(1, _TEXTURE_CELLS, _TEXTURE_CELLS))
    return F.resize_bilinear(Tensor(cells), script.size).data


def render_frame(script: SceneScript, frame: int, texture: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Render one H×W grayscale frame; returns ``(image, landmarks)``."""
    face = script.face
    height, width = script.size
    grid = F.pixel_grid(height, width)
    landmarks = frame_landmarks(script, frame)
    hx, hy = script.displacement("head", frame)

    cx = face.head_center[0] * width + hx
    cy = face.head_center[1] * height + hy
    rx, ry = face.head_radii[0] * width, face.head_radii[1] * height
    radius = np.hypot((grid[..., 0] - cx) / rx, (grid[..., 1] - cy) / ry)
    head = np.clip(0.5 - (radius - 1.0) * min(rx, ry), 0.0, 1.0)

    if texture is None:
        texture = _texture(script)
    # The texture is sampled in head coordinates so it moves with the head.
    moved = F.warp(Tensor(texture), np.broadcast_to(np.array([-hx, -hy]), (height, width, 2))).data[0]
    skin = face.skin + face.texture_amplitude * moved
    image = face.background * (1.0 - head) + skin * head

    half_width = face.stroke_width / 2
    for strokes in _STROKES.values():
        for first, last, closed in strokes:
            coverage = _polyline_coverage(grid, landmarks[first : last + 1], closed, half_width)
            image = image * (1.0 - coverage) + face.stroke * coverage

    for eye in (RIGHT_EYE, LEFT_EYE):
        center = landmarks[eye.start : eye.stop].mean(axis=0)
        pupil = 0.6 * face.eye_radii[1] * height
        dist = np.hypot(grid[..., 0] - center[0], grid[..., 1] - center[1])
        coverage = np.clip(pupil + 0.5 - dist, 0.0, 1.0)
        image = image * (1.0 - coverage) + face.stroke * coverage

    return np.clip(image, 0.0, 1.0), landmarks


def render_scene(script: SceneScript, channels: int = 3) -> RenderedScene:
    """Render every frame of ``script``, replicating the gray image to ``channels``."""
    for entry in script.timeline:
        if entry.part not in PARTS:
            raise ValueError(f"Unknown part id '{entry.part}'")
    height, width = script.size
    texture = _texture(script)
    frames: list[np.ndarray] = []
    landmark_sets: list[LandmarkSet] = []
    for index in range(1, script.frame_count + 1):
        image, pts = render_frame(script, index, texture)
        frames.append(np.repeat(image[None], channels, axis=0))
        outside = (pts[:, 0] < 0) | (pts[:, 0] > width - 1) | (pts[:, 1] < 0) | (pts[:, 1] > height - 1)
        if outside.any():
            first = int(np.argmax(outside))
            raise ValueError(
                f"Frame {index} moves landmark {first} to ({pts[first, 0]:.2f}, {pts[first, 1]:.2f}), "
                f"outside the {width}×{height} image"
            )
        landmark_sets.append(LandmarkSet.from_array(pts, script.size))
    logger.debug("Rendered %d frames at %d×%d", script.frame_count, height, width)
    return RenderedScene(frames=frames, landmarks=landmark_sets)


# ----------------------------------------------------------------------
# Random micro-expression clips
# ----------------------------------------------------------------------

# Action -> list of (part, x direction, y direction).
ACTIONS: dict[str, list[tuple[str, float, float]]] = {
    "brow_raise": [("right_brow", 0.0, -1.0), ("left_brow", 0.0, -1.0)],
    "brow_lower": [("right_brow", 0.3, 1.0), ("left_brow", -0.3, 1.0)],
    "mouth_corner": [("mouth", 0.0, -1.0)],
    "lid": [("right_eye", 0.0, 1.0), ("left_eye", 0.0, 1.0)],
    "jaw_drop": [("jaw", 0.0, 1.0), ("mouth", 0.0, 0.6)],
}


def random_script(
    rng: np.random.Generator,
    *,
    size: tuple[int, int] = (64, 64),
    frame_count: int = 16,
    action: str | None = None,
) -> SceneScript:
    """A clip with one action following an onset → apex → offset envelope.

    Displacements follow ``peak · sin(π t)`` over the clip, so frame 1 is
    neutral and the apex sits mid-clip.
    """
    name = action or str(rng.choice(sorted(ACTIONS)))
    if name not in ACTIONS:
        raise ValueError(f"Unknown action '{name}'; expected one of {', '.join(sorted(ACTIONS))}")
    bound = 0.05 * min(size)
    peak = rng.uniform(0.4, 1.0) * bound
    # Head jitter and height leave room for a full jaw drop at 16×16.
    face = FaceParams(
        head_center=(0.5 + rng.uniform(-0.03, 0.03), 0.5 + rng.uniform(-0.02, 0.02)),
        head_radii=(0.34, 0.37),
        skin=float(rng.uniform(0.6, 0.8)),
        background=float(rng.uniform(0.05, 0.25)),
    )
    timeline: list[PartDisplacement] = []
    for frame in range(2, frame_count + 1):
        phase = np.sin(np.pi * (frame - 1) / max(frame_count - 1, 1))
        amount = peak * phase
        for part, ux, uy in ACTIONS[name]:
            dx, dy = float(np.clip(ux * amount, -bound, bound)), float(np.clip(uy * amount, -bound, bound))
            if dx or dy:
                timeline.append(PartDisplacement(part=part, frame=frame, dx=dx, dy=dy))
    return SceneScript(
        size=size,
        frame_count=frame_count,
        seed=int(rng.integers(0, 2**31 - 1)),
        face=face,
        timeline=timeline,
    )
