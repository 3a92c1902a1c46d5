"""Compare a generated video against a reference video."""

from __future__ import annotations

import csv
import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from fpmm.schemas.reports import EvaluationReport, FrameMetrics
from fpmm.shared.errors import ShapeMismatchError
from fpmm.shared.frames import save_frame

logger = logging.getLogger(__name__)

# PSNR reported for identical frames.
PSNR_CAP = 100.0

METRICS_COLUMNS = ("frame", "l1", "psnr")


def l1_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute difference over all channels and pixels."""
    return float(np.mean(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio for signals in [0, 1], capped at ``PSNR_CAP``."""
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2))
    if mse <= 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def difference_image(frame: np.ndarray, onset: np.ndarray) -> np.ndarray:
    """|frame − onset| stretched so its largest value is 1; all-zero stays zero."""
    diff = np.abs(np.asarray(frame, dtype=np.float64) - np.asarray(onset, dtype=np.float64))
    peak = diff.max()
    return diff / peak if peak > 0 else diff


def evaluate(
    generated: Sequence[np.ndarray],
    reference: Sequence[np.ndarray],
    out_dir: str | Path | None = None,
) -> EvaluationReport:
    """Per-frame L1 and PSNR, plus difference images at the peak-motion frame.

    The peak frame is the reference frame furthest (L1) from reference frame 1.
    With ``out_dir`` set, ``diff_generated.png`` and ``diff_reference.png``
    show each video's peak frame against its own frame 1.
    """
    if len(generated) != len(reference):
        raise ValueError(f"Generated video has {len(generated)} frames, reference has {len(reference)}")
    if not generated:
        raise ValueError("Cannot evaluate empty videos")
    for i, (g, r) in enumerate(zip(generated, reference), start=1):
        if g.shape != r.shape:
            raise ShapeMismatchError(f"Frame {i}: generated shape {g.shape} differs from reference {r.shape}")

    frames = [
        FrameMetrics(index=i, l1=l1_distance(g, r), psnr=psnr(g, r))
        for i, (g, r) in enumerate(zip(generated, reference), start=1)
    ]
    motion = [l1_distance(r, reference[0]) for r in reference]
    peak = int(np.argmax(motion)) + 1

    written: list[str] = []
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, video in (("diff_generated.png", generated), ("diff_reference.png", reference)):
            save_frame(out_dir / name, difference_image(video[peak - 1], video[0]))
            written.append(name)

    report = EvaluationReport(frames=frames, peak_frame=peak, difference_images=written)
    logger.info("Evaluated %d frames: mean L1 %.6f, mean PSNR %.2f dB", len(frames), report.mean_l1, report.mean_psnr)
    return report


def write_metrics_csv(report: EvaluationReport, path: str | Path) -> Path:
    """Write ``frame,l1,psnr`` rows; values use ``repr`` so they read back exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for f in report.frames:
            writer.writerow([f.index, repr(f.l1), repr(f.psnr)])
    return path
