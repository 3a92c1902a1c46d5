"""Pydantic models for landmark files and keypoint specs."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from pydantic import BaseModel, RootModel, field_validator, model_validator

NUM_LANDMARKS = 68

# Index ranges in the standard 68-point ordering.
JAW = range(0, 17)
RIGHT_BROW = range(17, 22)
LEFT_BROW = range(22, 27)
NOSE = range(27, 36)
RIGHT_EYE = range(36, 42)
LEFT_EYE = range(42, 48)
MOUTH = range(48, 68)


class LandmarkSet(BaseModel):
    """68 ordered ``(x, y)`` pixel coordinates on an ``(H, W)`` image."""

    image_size: tuple[int, int]
    points: list[tuple[float, float]]

    @field_validator("image_size")
    @classmethod
    def check_size(cls, v: tuple[int, int]) -> tuple[int, int]:
        if v[0] <= 0 or v[1] <= 0:
            raise ValueError(f"image_size must be positive, got {v}")
        return v

    @model_validator(mode="after")
    def check_points(self) -> "LandmarkSet":
        if len(self.points) != NUM_LANDMARKS:
            raise ValueError(f"Expected exactly {NUM_LANDMARKS} landmarks, got {len(self.points)}")
        height, width = self.image_size
        for i, (x, y) in enumerate(self.points):
            if not (0 <= x <= width - 1 and 0 <= y <= height - 1):
                raise ValueError(f"Landmark {i} at ({x}, {y}) lies outside the {height}×{width} image")
        return self

    @classmethod
    def from_array(cls, points: np.ndarray, image_size: tuple[int, int]) -> "LandmarkSet":
        return cls(image_size=image_size, points=[(float(x), float(y)) for x, y in np.asarray(points)])

    @classmethod
    def load(cls, path: str | Path) -> "LandmarkSet":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Landmark file not found: {path}")
        return cls.model_validate_json(path.read_text())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.model_dump_json())

    def array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.float64)

    def rescaled(self, size: tuple[int, int]) -> "LandmarkSet":
        """Map the points onto an image of another size (corner-aligned)."""
        if tuple(size) == tuple(self.image_size):
            return self
        (h0, w0), (h1, w1) = self.image_size, size
        pts = self.array()
        sx = (w1 - 1) / (w0 - 1) if w0 > 1 else 1.0
        sy = (h1 - 1) / (h0 - 1) if h0 > 1 else 1.0
        scaled = np.stack([np.clip(pts[:, 0] * sx, 0, w1 - 1), np.clip(pts[:, 1] * sy, 0, h1 - 1)], axis=-1)
        return LandmarkSet.from_array(scaled, (h1, w1))


class KeypointEntry(BaseModel):
    """A landmark index plus an offset in units of half the pupillary distance."""

    landmark_index: int
    dx_factor: float = 0.0
    dy_factor: float = 0.0

    @field_validator("landmark_index")
    @classmethod
    def check_index(cls, v: int) -> int:
        if not 0 <= v < NUM_LANDMARKS:
            raise ValueError(f"landmark_index must be in [0, {NUM_LANDMARKS - 1}], got {v}")
        return v


class KeypointSpec(RootModel[list[KeypointEntry]]):
    """Ordered list of keypoint entries; the file form is ``[[index, dx, dy], ...]``."""

    @field_validator("root", mode="before")
    @classmethod
    def accept_triples(cls, v: object) -> object:
        if isinstance(v, list):
            return [
                {"landmark_index": e[0], "dx_factor": e[1], "dy_factor": e[2]}
                if isinstance(e, (list, tuple))
                else e
                for e in v
            ]
        return v

    @property
    def entries(self) -> list[KeypointEntry]:
        return self.root

    @classmethod
    def load(cls, path: str | Path) -> "KeypointSpec":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Keypoint spec file not found: {path}")
        return cls.model_validate_json(path.read_text())

    def to_triples(self) -> list[list[float]]:
        return [[e.landmark_index, e.dx_factor, e.dy_factor] for e in self.root]


# Brows, eye corners, nose tip and mouth corners, plus half-PD offsets above the
# brows and around the mouth corners. Mirrors config/keypoint-spec.json.
DEFAULT_KEYPOINT_TRIPLES: list[tuple[int, float, float]] = [
    (17, 0.0, 0.0), (19, 0.0, 0.0), (21, 0.0, 0.0),
    (22, 0.0, 0.0), (24, 0.0, 0.0), (26, 0.0, 0.0),
    (19, 0.0, -1.0), (24, 0.0, -1.0),
    (21, 0.5, -1.0), (22, -0.5, -1.0),
    (36, 0.0, 0.0), (39, 0.0, 0.0), (42, 0.0, 0.0), (45, 0.0, 0.0),
    (30, 0.0, 0.0),
    (48, 0.0, 0.0), (54, 0.0, 0.0),
    (48, -1.0, 0.0), (54, 1.0, 0.0),
    (48, 0.0, 1.0), (54, 0.0, 1.0),
]


def default_keypoint_spec() -> KeypointSpec:
    return KeypointSpec.model_validate([list(t) for t in DEFAULT_KEYPOINT_TRIPLES])


class LandmarkSequence(RootModel[list[LandmarkSet]]):
    """Per-frame landmarks of a clip, frame 1 first."""

    @property
    def frames(self) -> list[LandmarkSet]:
        return self.root

    @classmethod
    def load(cls, path: str | Path) -> "LandmarkSequence":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Landmark file not found: {path}")
        return cls.model_validate_json(path.read_text())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.model_dump_json())


def load_onset_landmarks(path: str | Path) -> LandmarkSet:
    """Read a landmark file holding one ``LandmarkSet`` or a per-frame list; return the first set."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Landmark file not found: {path}")
    text = path.read_text()
    if text.lstrip().startswith("["):
        frames = LandmarkSequence.model_validate_json(text).frames
        if not frames:
            raise ValueError(f"Landmark file {path} holds no frames")
        return frames[0]
    return LandmarkSet.model_validate_json(text)
