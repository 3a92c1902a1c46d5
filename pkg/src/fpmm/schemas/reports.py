"""Training and evaluation reports."""

from __future__ import annotations

from datetime import datetime

from pydantic import BaseModel, Field

from fpmm.schemas.config import LossWeights

# Training-log column order.
LOG_COLUMNS = ("step", "perceptual", "mae", "adv_g", "adv_d", "total")


class LossReport(BaseModel):
    """Loss values of one training step; ``total`` is the weighted generator objective."""

    step: int = 0
    perceptual: float
    reconstruction_mae: float
    adversarial_g: float
    adversarial_d: float
    equivariance: float = 0.0
    total: float
    weights: LossWeights

    def log_row(self) -> list[str]:
        return [
            str(self.step),
            *(repr(v) for v in (self.perceptual, self.reconstruction_mae, self.adversarial_g, self.adversarial_d, self.total)),
        ]


class FrameMetrics(BaseModel):
    index: int  # 1-based
    l1: float
    psnr: float


class EvaluationReport(BaseModel):
    """Per-frame comparison of a generated video against its reference."""

    generated_at: str = Field(default_factory=lambda: datetime.now().strftime("%Y-%m-%d %H:%M"))
    generated_dir: str = ""
    reference_dir: str = ""
    frames: list[FrameMetrics]
    peak_frame: int  # 1-based index of the reference frame furthest from frame 1
    difference_images: list[str] = []

    @property
    def mean_l1(self) -> float:
        return sum(f.l1 for f in self.frames) / len(self.frames) if self.frames else 0.0

    @property
    def mean_psnr(self) -> float:
        return sum(f.psnr for f in self.frames) / len(self.frames) if self.frames else 0.0
