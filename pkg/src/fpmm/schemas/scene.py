"""Scene script models for the synthetic face renderer."""

from __future__ import annotations

from pathlib import Path

from pydantic import BaseModel, Field, field_validator, model_validator

# Part ids a timeline entry may move. "head" moves the whole face, texture included.
PARTS = ("head", "jaw", "right_brow", "left_brow", "right_eye", "left_eye", "nose", "mouth")

# Largest per-part displacement, as a fraction of min(H, W).
MAX_DISPLACEMENT_FRACTION = 0.05


class FaceParams(BaseModel):
    """Geometry and tones of the parametric face.

    Positions and lengths are fractions of the image width (x) or height (y);
    tones are gray levels in [0, 1].
    """

    head_center: tuple[float, float] = (0.5, 0.5)
    head_radii: tuple[float, float] = (0.34, 0.4)
    eye_y: float = 0.44
    eye_spacing: float = 0.14  # half the distance between eye centers
    eye_radii: tuple[float, float] = (0.065, 0.028)
    brow_y: float = 0.34
    brow_width: float = 0.15
    brow_arch: float = 0.025
    nose_top: float = 0.47
    nose_tip: float = 0.6
    nose_width: float = 0.05
    mouth_y: float = 0.72
    mouth_radii: tuple[float, float] = (0.12, 0.035)

    background: float = Field(0.15, ge=0, le=1)
    skin: float = Field(0.7, ge=0, le=1)
    stroke: float = Field(0.1, ge=0, le=1)
    stroke_width: float = Field(1.2, gt=0)  # pixels
    texture_amplitude: float = Field(0.05, ge=0, le=0.5)


class PartDisplacement(BaseModel):
    """Offset of one face part at one frame (1-based), in pixels."""

    part: str
    frame: int = Field(ge=1)
    dx: float = 0.0
    dy: float = 0.0

    @field_validator("part")
    @classmethod
    def check_part(cls, v: str) -> str:
        if v not in PARTS:
            raise ValueError(f"Unknown part id '{v}'; expected one of {', '.join(PARTS)}")
        return v


class SceneScript(BaseModel):
    """A face plus a timeline of part displacements."""

    size: tuple[int, int] = (64, 64)
    frame_count: int = Field(16, ge=1)
    seed: int = 0
    face: FaceParams = FaceParams()
    timeline: list[PartDisplacement] = []

    @field_validator("size")
    @classmethod
    def check_size(cls, v: tuple[int, int]) -> tuple[int, int]:
        if v[0] < 16 or v[1] < 16:
            raise ValueError(f"Scene size must be at least 16×16, got {v}")
        return v

    @model_validator(mode="after")
    def check_timeline(self) -> "SceneScript":
        bound = self.max_displacement
        seen: set[tuple[str, int]] = set()
        for entry in self.timeline:
            if entry.frame > self.frame_count:
                raise ValueError(f"Timeline frame {entry.frame} exceeds frame_count {self.frame_count}")
            key = (entry.part, entry.frame)
            if key in seen:
                raise ValueError(f"Duplicate timeline entry for part '{entry.part}' at frame {entry.frame}")
            seen.add(key)
            if abs(entry.dx) > bound or abs(entry.dy) > bound:
                raise ValueError(
                    f"Displacement ({entry.dx}, {entry.dy}) of '{entry.part}' at frame {entry.frame} "
                    f"exceeds the micro-motion bound of {bound:g} px"
                )
        return self

    @property
    def max_displacement(self) -> float:
        return MAX_DISPLACEMENT_FRACTION * min(self.size)

    def displacement(self, part: str, frame: int) -> tuple[float, float]:
        for entry in self.timeline:
            if entry.part == part and entry.frame == frame:
                return entry.dx, entry.dy
        return 0.0, 0.0

    @classmethod
    def load(cls, path: str | Path) -> "SceneScript":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Scene script not found: {path}")
        return cls.model_validate_json(path.read_text())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.model_dump_json(indent=2))
