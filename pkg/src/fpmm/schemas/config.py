"""Configuration schema: validates the flat training/generation config file."""

from __future__ import annotations

import hashlib
import json
import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

# Fields that change the shape of the networks; they make up the checkpoint digest.
ARCHITECTURE_FIELDS = (
    "image_size",
    "channels",
    "num_keypoints",
    "block_expansion",
    "max_features",
    "num_blocks",
    "motion_downsample",
    "generator_channels",
    "residual_blocks",
    "discriminator_channels",
    "discriminator_layers",
    "feature_channels",
    "use_prior",
)


class LossWeights(BaseModel):
    """Weight per loss term; the perceptual weight must be the largest."""

    perceptual: float = 10.0
    mae: float = 1.0
    adversarial: float = 1.0
    equivariance: float = 1.0

    @model_validator(mode="after")
    def check_perceptual_highest(self) -> "LossWeights":
        others = {"mae": self.mae, "adversarial": self.adversarial, "equivariance": self.equivariance}
        for name, value in others.items():
            if value < 0:
                raise ValueError(f"Loss weight '{name}' must be >= 0, got {value}")
            if not self.perceptual > value:
                raise ValueError(
                    f"The perceptual loss weight ({self.perceptual}) must be strictly greater "
                    f"than every other weight; '{name}' is {value}"
                )
        return self


class Config(BaseModel):
    """Top-level flat configuration. Unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    # Frames
    image_size: int = Field(64, gt=0)
    channels: int = Field(3, gt=0)

    # Region-focusing prior
    prior_sigma: float | None = Field(None, gt=0)  # None: derived from image_size
    exponent_form: Literal["distance", "squared"] = "distance"
    keypoint_spec_file: str = ""  # empty: built-in default spec
    use_prior: bool = True  # false: the prior channel is all zeros (no-prior baseline)

    # Motion prediction
    num_keypoints: int = Field(10, gt=0)
    temperature: float = Field(0.1, gt=0)
    heatmap_variance: float = Field(0.01, gt=0)
    block_expansion: int = Field(8, gt=0)
    max_features: int = Field(64, gt=0)
    num_blocks: int = Field(3, gt=0)
    motion_downsample: int = Field(2, gt=0)

    # Expression generation
    generator_channels: int = Field(16, gt=0)
    residual_blocks: int = Field(2, ge=0)
    discriminator_channels: int = Field(16, gt=0)
    discriminator_layers: int = Field(3, gt=0)
    feature_channels: list[int] = [8, 16, 32]
    pyramid_scales: list[float] = [1.0, 0.5]
    feature_weights_file: str = ""

    # Loss weights
    weight_perceptual: float = 10.0
    weight_mae: float = 1.0
    weight_adversarial: float = 1.0
    weight_equivariance: float = 1.0
    equivariance: bool = True
    tps_sigma_affine: float = Field(0.05, ge=0)
    tps_sigma_tps: float = Field(0.005, ge=0)
    tps_points: int = Field(5, gt=1)

    # Optimizer
    learning_rate: float = Field(2e-4, gt=0)
    beta1: float = Field(0.5, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)

    # Run
    steps: int = Field(2000, ge=0)
    batch_size: int = Field(4, gt=0)
    log_every: int = Field(10, gt=0)
    seed: int = 0
    precision: Literal["float32", "float64"] = "float32"
    mode: Literal["onset-relative", "inter-frame"] = "onset-relative"
    threads: int = Field(1, ge=1)
    fps: float = Field(25.0, gt=0)

    @model_validator(mode="after")
    def check_loss_weights(self) -> "Config":
        # Re-validated through LossWeights so the rule lives in one place.
        self.loss_weights()
        return self

    @model_validator(mode="after")
    def check_resolutions(self) -> "Config":
        motion_factor = self.motion_downsample * 2**self.num_blocks
        if self.image_size % motion_factor:
            raise ValueError(
                f"image_size ({self.image_size}) must be divisible by "
                f"motion_downsample * 2**num_blocks = {motion_factor}"
            )
        if self.image_size % 4:
            raise ValueError(f"image_size ({self.image_size}) must be divisible by 4")
        if self.image_size // 2**self.discriminator_layers < 1:
            raise ValueError("discriminator_layers downsample the image below one pixel")
        return self

    @model_validator(mode="after")
    def check_pyramid(self) -> "Config":
        if not self.pyramid_scales:
            raise ValueError("At least one pyramid scale is required")
        for scale in self.pyramid_scales:
            factor = 1.0 / scale if scale > 0 else 0.0
            if scale <= 0 or scale > 1 or not math.isclose(factor, round(factor)) or round(factor) & (round(factor) - 1):
                raise ValueError(f"pyramid scale {scale} must be 1/2**n")
            if self.image_size % round(factor):
                raise ValueError(f"pyramid scale {scale} does not divide image_size {self.image_size}")
        if not self.feature_channels or any(c <= 0 for c in self.feature_channels):
            raise ValueError("feature_channels must be a non-empty list of positive ints")
        return self

    # ------------------------------------------------------------------
    # Derived values
    # ------------------------------------------------------------------

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            perceptual=self.weight_perceptual,
            mae=self.weight_mae,
            adversarial=self.weight_adversarial,
            equivariance=self.weight_equivariance if self.equivariance else 0.0,
        )

    @property
    def dtype(self) -> type[np.floating]:
        return np.float32 if self.precision == "float32" else np.float64

    @property
    def size(self) -> tuple[int, int]:
        return (self.image_size, self.image_size)

    def digest(self) -> bytes:
        """SHA-256 over the architecture fields; stored in checkpoints."""
        payload = {name: getattr(self, name) for name in ARCHITECTURE_FIELDS}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).digest()
