"""Animate a target image with a driving clip, frame by frame."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import TYPE_CHECKING, Literal

import numpy as np

from fpmm.config import keypoint_spec_for
from fpmm.data.preprocess import LUMA_WEIGHTS, preprocess
from fpmm.generation.model import MotionTransferModel
from fpmm.motion.keypoints import transfer_keypoints
from fpmm.prior.prior_map import prior_from_landmarks
from fpmm.schemas.landmarks import KeypointSpec, LandmarkSet, load_onset_landmarks
from fpmm.schemas.pipeline import GenerationJob, VideoManifest
from fpmm.shared.errors import ShapeMismatchError
from fpmm.shared.frames import load_image, load_video, save_video

if TYPE_CHECKING:
    from fpmm.shared.progress import RunProgress

logger = logging.getLogger(__name__)

Mode = Literal["onset-relative", "inter-frame"]


def to_gray_frame(frame: np.ndarray) -> np.ndarray:
    """Collapse a C×H×W frame to luma and replicate it back to C channels."""
    if frame.shape[0] == 3:
        gray = np.tensordot(np.asarray(LUMA_WEIGHTS, dtype=frame.dtype), frame, axes=1)
    else:
        gray = frame.mean(axis=0)
    return np.repeat(gray[None], frame.shape[0], axis=0)


def generate_video(
    model: MotionTransferModel,
    target: np.ndarray,
    target_prior: np.ndarray,
    driving: Sequence[np.ndarray],
    driving_prior: np.ndarray,
    *,
    mode: Mode = "onset-relative",
    threads: int = 1,
    grayscale: bool = True,
    progress: RunProgress | None = None,
) -> list[np.ndarray]:
    """Return one generated frame per driving frame.

    ``onset-relative``: frame k renders the target under the motion from
    driving frame 1 to frame k. ``inter-frame``: frame k moves generated
    frame k−1 by the motion between driving frames k−1 and k, so errors
    accumulate. Both priors are computed once per clip by the caller.
    """
    if len(driving) < 2:
        raise ValueError(f"A driving video needs at least 2 frames, got {len(driving)}")
    size = target.shape[1:]
    for i, frame in enumerate(driving, start=1):
        if frame.shape != target.shape:
            raise ShapeMismatchError(f"Driving frame {i} has shape {frame.shape}, target has {target.shape}")
    if target_prior.shape != size or driving_prior.shape != size:
        raise ShapeMismatchError("Prior maps must match the frame size")

    def finish(frame: np.ndarray) -> np.ndarray:
        return to_gray_frame(frame) if grayscale else frame

    task = "Generating frames"
    if progress:
        progress.start_task(task, total=len(driving))

    target_kp = model.detect(target, target_prior).detach()
    onset_kp = model.detect(driving[0], driving_prior).detach()

    if mode == "onset-relative":
        # Frames equal to the onset carry no motion and show the target at rest.
        rest = finish(model.autoencode(target).data)

        def render(frame: np.ndarray) -> np.ndarray:
            if np.array_equal(frame, driving[0]):
                out = rest.copy()
            else:
                driving_kp = model.detect(frame, driving_prior).detach()
                relative = transfer_keypoints(driving_kp, onset_kp, target_kp)
                out = finish(model.transfer(target, target_kp, relative).frame.data)
            if progress:
                progress.update_task(task, advance=1)
            return out

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            outputs = list(pool.map(render, driving))
    elif mode == "inter-frame":
        logger.warning("Inter-frame mode chains each frame on the previous output; errors accumulate over the clip")
        previous_kp = onset_kp
        current, current_kp = target, target_kp
        outputs = []
        for frame in driving:
            driving_kp = model.detect(frame, driving_prior).detach()
            relative = transfer_keypoints(driving_kp, previous_kp, current_kp)
            current = finish(model.transfer(current, current_kp, relative).frame.data)
            current_kp = model.detect(current, target_prior).detach()
            previous_kp = driving_kp
            outputs.append(current)
            if progress:
                progress.update_task(task, advance=1)
    else:
        raise ValueError(f"Unknown mode '{mode}'")

    if progress:
        progress.finish_task(task)
    return outputs


def run_job(
    job: GenerationJob,
    model: MotionTransferModel,
    *,
    spec: KeypointSpec | None = None,
    threads: int = 1,
    fps: float | None = None,
    progress: RunProgress | None = None,
) -> VideoManifest:
    """Load the job's files, generate the video and write it to ``job.output_dir``."""
    cfg = model.config
    spec = spec or keypoint_spec_for(cfg)
    size = cfg.size
    target_landmarks = load_onset_landmarks(job.target_landmarks)
    driving_landmarks = load_onset_landmarks(job.resolved_driving_landmarks())

    target = preprocess(load_image(job.target_image), size=size, channels=cfg.channels)
    raw_driving, manifest = load_video(job.driving_dir, cfg.channels)
    driving = [preprocess(f, size=size, channels=cfg.channels) for f in raw_driving]

    def prior(landmarks: LandmarkSet) -> np.ndarray:
        return prior_from_landmarks(landmarks, spec, size, sigma=cfg.prior_sigma, exponent_form=cfg.exponent_form).map

    frames = generate_video(
        model,
        target,
        prior(target_landmarks),
        driving,
        prior(driving_landmarks),
        mode=job.mode,
        threads=threads,
        progress=progress,
    )
    out = save_video(Path(job.output_dir), frames, fps=fps or manifest.fps, fmt=job.output_format)
    logger.info("Generated %d frames into %s", len(frames), job.output_dir)
    return out
