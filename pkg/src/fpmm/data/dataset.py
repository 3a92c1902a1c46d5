"""Bundled synthetic dataset: writing it to disk and sampling training batches from it."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from fpmm.config import keypoint_spec_for
from fpmm.data.preprocess import preprocess
from fpmm.data.scene import random_script, render_scene
from fpmm.generation.trainer import TrainingSample
from fpmm.prior.prior_map import prior_from_landmarks
from fpmm.schemas.config import Config
from fpmm.schemas.landmarks import KeypointSpec, LandmarkSequence
from fpmm.schemas.pipeline import DATASET_MANIFEST_NAME, ClipEntry, DatasetManifest
from fpmm.shared.frames import load_video, save_video

if TYPE_CHECKING:
    from fpmm.shared.progress import RunProgress

logger = logging.getLogger(__name__)


def build_synthetic_dataset(
    out_dir: str | Path,
    *,
    clips: int = 20,
    frames: int = 16,
    size: int = 64,
    seed: int = 0,
    progress: RunProgress | None = None,
) -> DatasetManifest:
    """Render ``clips`` random micro-expression clips and write them with a dataset manifest.

    Each clip directory holds its frames, ``landmarks.json`` (one set per
    frame) and the ``script.json`` it was rendered from.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries: list[ClipEntry] = []
    if progress:
        progress.start_task("Rendering clips", total=clips)
    for i in range(1, clips + 1):
        script = random_script(rng, size=(size, size), frame_count=frames)
        scene = render_scene(script)
        clip_dir = out_dir / f"clip_{i:03d}"
        save_video(clip_dir, scene.frames)
        LandmarkSequence(scene.landmarks).save(clip_dir / "landmarks.json")
        script.save(clip_dir / "script.json")
        entries.append(ClipEntry(frames_dir=clip_dir.name, landmarks_file=f"{clip_dir.name}/landmarks.json"))
        if progress:
            progress.update_task("Rendering clips", clip_dir.name, advance=1)
    if progress:
        progress.finish_task("Rendering clips")
    manifest = DatasetManifest(clips=entries)
    (out_dir / DATASET_MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2))
    logger.info("Wrote %d clips to %s", clips, out_dir)
    return manifest


@dataclass(frozen=True)
class Clip:
    """Frames at model resolution plus the clip's prior map from its onset landmarks."""

    frames: list[np.ndarray]
    prior: np.ndarray


class ClipDataset:
    """All clips of a dataset manifest, loaded into memory."""

    def __init__(self, clips: list[Clip]) -> None:
        if not clips:
            raise ValueError("Dataset holds no clips")
        for i, clip in enumerate(clips):
            if len(clip.frames) < 2:
                raise ValueError(f"Clip {i + 1} has fewer than 2 frames")
        self.clips = clips

    def __len__(self) -> int:
        return len(self.clips)

    @classmethod
    def load(cls, manifest_path: str | Path, config: Config, spec: KeypointSpec | None = None) -> "ClipDataset":
        manifest_path = Path(manifest_path)
        manifest = DatasetManifest.load(manifest_path)
        root = manifest_path if manifest_path.is_dir() else manifest_path.parent
        spec = spec or keypoint_spec_for(config)
        size = config.size
        clips = []
        for entry in manifest.clips:
            raw, _ = load_video(root / entry.frames_dir, config.channels)
            frames = [preprocess(f, size=size, channels=config.channels) for f in raw]
            landmarks = LandmarkSequence.load(root / entry.landmarks_file).frames
            if entry.onset_index > len(landmarks):
                raise ValueError(f"Onset index {entry.onset_index} beyond the {len(landmarks)} landmark sets of {entry.frames_dir}")
            onset = landmarks[entry.onset_index - 1]
            prior = prior_from_landmarks(
                onset, spec, size, sigma=config.prior_sigma, exponent_form=config.exponent_form
            ).map
            clips.append(Clip(frames=frames[entry.onset_index - 1 :], prior=prior))
        logger.info("Loaded %d clips from %s", len(clips), manifest_path)
        return cls(clips)

    def sample_batch(self, rng: np.random.Generator, batch_size: int) -> list[TrainingSample]:
        """Random (target, driving) pairs of distinct frames, each from one random clip."""
        batch = []
        for _ in range(batch_size):
            clip = self.clips[int(rng.integers(len(self.clips)))]
            i, j = rng.choice(len(clip.frames), size=2, replace=False)
            batch.append(TrainingSample(target=clip.frames[int(i)], driving=clip.frames[int(j)], prior=clip.prior))
        return batch
