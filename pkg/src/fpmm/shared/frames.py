"""Frame and video I/O: PNG via Pillow, 16-bit PGM, numbered frame directories.

In memory a frame is a C×H×W float array in [0, 1]. On disk a video is a
directory of ``frame_0001.png`` (or ``.pgm``) files plus ``manifest.json``.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image

from fpmm.schemas.pipeline import VIDEO_MANIFEST_NAME, VideoManifest
from fpmm.shared.errors import ShapeMismatchError

logger = logging.getLogger(__name__)

PGM_MAXVAL = 65535
FRAME_FORMATS = ("png", "pgm")


def frame_name(index: int, fmt: str = "png") -> str:
    """Zero-padded 1-based file name: ``frame_0001.png``."""
    return f"frame_{index:04d}.{fmt}"


def to_uint16(field: np.ndarray) -> np.ndarray:
    return np.round(np.clip(field, 0.0, 1.0) * PGM_MAXVAL).astype(np.uint16)


# ----------------------------------------------------------------------
# PGM
# ----------------------------------------------------------------------

# Pillow rescales PGM samples of any maxval to the full range of these modes.
_FULL_SCALE = {"L": 255, "I": PGM_MAXVAL, "I;16": PGM_MAXVAL, "I;16B": PGM_MAXVAL}


def write_pgm(path: str | Path, field: np.ndarray) -> None:
    """Write an H×W field in [0, 1] as a binary 16-bit PGM."""
    field = np.asarray(field)
    if field.ndim != 2:
        raise ShapeMismatchError(f"PGM export needs an H×W field, got shape {field.shape}")
    Image.fromarray(to_uint16(field).astype(np.int32)).save(path, format="PPM")


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a grayscale PGM (binary or plain, any maxval) into an H×W float field in [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Image not found: {path}")
    with Image.open(path) as img:
        if img.format != "PPM" or img.mode not in ("L", "I"):
            raise ValueError(f"{path} is not a grayscale PGM (format {img.format}, mode {img.mode})")
        return np.asarray(img, dtype=np.float64) / _FULL_SCALE[img.mode]


# ----------------------------------------------------------------------
# Single frames
# ----------------------------------------------------------------------


def load_image(path: str | Path) -> np.ndarray:
    """Read an image file as H×W×c floats in [0, 1] (c = 1 or 3), without any conversion."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Image not found: {path}")
    with Image.open(path) as img:
        if img.mode in _FULL_SCALE:
            return (np.asarray(img, dtype=np.float64) / _FULL_SCALE[img.mode])[..., None]
        if img.mode != "RGB":
            img = img.convert("RGB")
        return np.asarray(img, dtype=np.float64) / 255.0


def load_frame(path: str | Path, channels: int = 3) -> np.ndarray:
    """Read an image as a C×H×W frame; single-channel images are replicated."""
    arr = np.moveaxis(load_image(path), -1, 0)
    if arr.shape[0] == channels:
        return arr
    if arr.shape[0] == 1:
        return np.repeat(arr, channels, axis=0)
    if channels == 1:
        return arr[:1]
    raise ShapeMismatchError(f"{path} has {arr.shape[0]} channels, cannot load as {channels}")


def save_frame(path: str | Path, frame: np.ndarray) -> None:
    """Write a C×H×W (or H×W) frame. Frames with equal channels are stored as grayscale."""
    path = Path(path)
    frame = np.asarray(frame)
    if frame.ndim == 3:
        gray = frame.shape[0] == 1 or all(np.array_equal(frame[0], frame[c]) for c in range(1, frame.shape[0]))
        field = frame[0] if gray else np.moveaxis(frame[:3], 0, -1)
    else:
        field = frame
    if path.suffix.lower() == ".pgm":
        if field.ndim != 2:
            raise ShapeMismatchError("PGM frames must be grayscale")
        write_pgm(path, field)
        return
    Image.fromarray(np.round(np.clip(field, 0.0, 1.0) * 255).astype(np.uint8)).save(path)


# ----------------------------------------------------------------------
# Frame directories
# ----------------------------------------------------------------------


def save_video(
    directory: str | Path,
    frames: list[np.ndarray],
    *,
    fps: float = 25.0,
    fmt: str = "png",
) -> VideoManifest:
    """Write ``frames`` as a numbered frame directory with its manifest."""
    if fmt not in FRAME_FORMATS:
        raise ValueError(f"Unknown frame format '{fmt}'; expected one of {FRAME_FORMATS}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames, start=1):
        save_frame(directory / frame_name(i, fmt), frame)
    size = tuple(frames[0].shape[-2:]) if frames else (0, 0)
    manifest = VideoManifest(fps=fps, frame_count=len(frames), size=size, format=fmt)
    (directory / VIDEO_MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2))
    logger.debug("Wrote %d frames to %s", len(frames), directory)
    return manifest


def list_frames(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    found: list[Path] = []
    for fmt in FRAME_FORMATS:
        found.extend(directory.glob(f"frame_*.{fmt}"))
    return sorted(found, key=lambda p: p.name)


def load_video(directory: str | Path, channels: int = 3) -> tuple[list[np.ndarray], VideoManifest]:
    """Read a frame directory. The manifest is optional; when present its count must match."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"Frame directory not found: {directory}")
    paths = list_frames(directory)
    if not paths:
        raise ValueError(f"No frame_*.png or frame_*.pgm files in {directory}")
    frames = [load_frame(p, channels) for p in paths]
    sizes = {f.shape[-2:] for f in frames}
    if len(sizes) != 1:
        raise ShapeMismatchError(f"Frames in {directory} differ in size: {sorted(sizes)}")

    manifest_path = directory / VIDEO_MANIFEST_NAME
    if manifest_path.exists():
        manifest = VideoManifest.model_validate_json(manifest_path.read_text())
        if manifest.frame_count != len(frames):
            raise ValueError(
                f"{manifest_path} lists {manifest.frame_count} frames but {len(frames)} were found"
            )
    else:
        manifest = VideoManifest(frame_count=len(frames), size=frames[0].shape[-2:], format=paths[0].suffix[1:])
    return frames, manifest
