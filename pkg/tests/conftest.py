"""Shared test fixtures."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from fpmm.data.dataset import build_synthetic_dataset
from fpmm.data.scene import RenderedScene, random_script, render_scene
from fpmm.schemas.config import Config
from fpmm.schemas.landmarks import LEFT_EYE, NUM_LANDMARKS, RIGHT_EYE, LandmarkSet

# Smallest architecture the config validators accept at 16×16, in double precision.
TINY_CONFIG = dict(
    image_size=16,
    channels=1,
    num_keypoints=3,
    block_expansion=4,
    max_features=8,
    num_blocks=2,
    motion_downsample=2,
    generator_channels=4,
    residual_blocks=1,
    discriminator_channels=4,
    discriminator_layers=2,
    feature_channels=[4, 4],
    pyramid_scales=[1.0, 0.5],
    tps_points=3,
    batch_size=1,
    steps=2,
    log_every=1,
    precision="float64",
)


def make_landmarks(
    right_eye: tuple[float, float],
    left_eye: tuple[float, float],
    size: tuple[int, int] = (256, 256),
    rest: tuple[float, float] | None = None,
) -> LandmarkSet:
    """68 landmarks with both eyes collapsed onto the given centers and every other point at ``rest``."""
    height, width = size
    pts = np.tile(rest or ((width - 1) / 2, (height - 1) / 2), (NUM_LANDMARKS, 1))
    pts[list(RIGHT_EYE)] = right_eye
    pts[list(LEFT_EYE)] = left_eye
    return LandmarkSet.from_array(pts, size)


@pytest.fixture
def tiny_config() -> Config:
    return Config(**TINY_CONFIG)


@pytest.fixture
def tmp_config(tmp_path: Path) -> Path:
    """Write the tiny config as YAML and return its path."""
    cfg = tmp_path / "config.yml"
    lines = []
    for key, value in TINY_CONFIG.items():
        lines.append(f"{key}: {value}" if not isinstance(value, str) else f'{key}: "{value}"')
    cfg.write_text("\n".join(lines) + "\n")
    return cfg


@pytest.fixture
def tiny_scene() -> RenderedScene:
    """Four 16×16 gray frames of a brow raise with their landmarks."""
    script = random_script(np.random.default_rng(0), size=(16, 16), frame_count=4, action="brow_raise")
    return render_scene(script, channels=1)


@pytest.fixture
def tiny_dataset(tmp_path: Path) -> Path:
    """Two synthetic 16×16 clips of four frames on disk; returns the dataset directory."""
    out = tmp_path / "data"
    build_synthetic_dataset(out, clips=2, frames=4, size=16, seed=0)
    return out
