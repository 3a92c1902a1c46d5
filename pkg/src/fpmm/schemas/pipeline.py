"""Video manifests, dataset manifests and generation jobs."""

from __future__ import annotations

from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field

VIDEO_MANIFEST_NAME = "manifest.json"
DATASET_MANIFEST_NAME = "dataset.json"


class VideoManifest(BaseModel):
    """Sidecar of a frame directory."""

    fps: float = Field(25.0, gt=0)
    frame_count: int = Field(ge=0)
    size: tuple[int, int]
    format: Literal["png", "pgm"] = "png"


class ClipEntry(BaseModel):
    """One clip of a dataset; paths are relative to the manifest's directory."""

    frames_dir: str
    landmarks_file: str
    onset_index: int = Field(1, ge=1)


class DatasetManifest(BaseModel):
    clips: list[ClipEntry] = []

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        path = Path(path)
        if path.is_dir():
            path = path / DATASET_MANIFEST_NAME
        if not path.exists():
            raise FileNotFoundError(f"Dataset manifest not found: {path}")
        return cls.model_validate_json(path.read_text())


class GenerationJob(BaseModel):
    """Everything needed to animate one target image with one driving clip."""

    target_image: Path
    target_landmarks: Path
    driving_dir: Path
    driving_landmarks: Path | None = None  # default: <driving_dir>/landmarks.json
    checkpoint: Path
    output_dir: Path
    mode: Literal["onset-relative", "inter-frame"] = "onset-relative"
    output_format: Literal["png", "pgm"] = "png"

    def resolved_driving_landmarks(self) -> Path:
        return self.driving_landmarks or self.driving_dir / "landmarks.json"
