"""Training losses: perceptual (frozen feature pyramid), least-squares adversarial, equivariance."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from fpmm.engine import functional as F
from fpmm.engine.nn import Conv2d, Module
from fpmm.engine.tensor import Tensor, as_tensor
from fpmm.generation.discriminator import Discriminator
from fpmm.motion.keypoints import KeypointDetector, KeypointSet, inverse_2x2
from fpmm.shared.errors import ShapeMismatchError

logger = logging.getLogger(__name__)


# ----------------------------------------------------------------------
# Perceptual loss
# ----------------------------------------------------------------------


class FeatureExtractor(Module):
    """Fixed convolutional stages, 2×2 average pooling between stages.

    Weights are drawn from their own seeded generator and frozen; an ``.npz``
    file with ``stage{i}.weight`` / ``stage{i}.bias`` arrays may replace them.
    """

    def __init__(
        self,
        channels: int,
        stage_channels: Sequence[int] = (8, 16, 32),
        *,
        scales: Sequence[float] = (1.0, 0.5),
        seed: int = 0,
        dtype: Any = np.float64,
    ) -> None:
        rng = np.random.default_rng(seed)
        widths = [channels, *stage_channels]
        self.stages = [Conv2d(widths[i], widths[i + 1], 3, rng, dtype=dtype) for i in range(len(stage_channels))]
        self.scales = [float(s) for s in scales]
        self.freeze()

    def load_weights(self, path: str | Path) -> None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Feature weights not found: {path}")
        with np.load(path) as archive:
            for i, stage in enumerate(self.stages):
                for name, tensor in (("weight", stage.weight), ("bias", stage.bias)):
                    key = f"stage{i}.{name}"
                    if key not in archive:
                        raise ValueError(f"{path} has no array '{key}'")
                    if archive[key].shape != tensor.shape:
                        raise ValueError(f"'{key}' in {path} has shape {archive[key].shape}, expected {tensor.shape}")
                    tensor.data = archive[key].astype(tensor.dtype)
        logger.info("Loaded feature extractor weights from %s", path)

    def forward(self, image: Tensor) -> list[Tensor]:
        features = []
        x = image
        for i, stage in enumerate(self.stages):
            if i:
                x = F.avg_pool2d(x, 2)
            x = stage(x).leaky_relu()
            features.append(x)
        return features


def _pyramid_level(image: Tensor, scale: float) -> Tensor:
    factor = round(1.0 / scale)
    return image if factor == 1 else F.avg_pool2d(image, factor)


def perceptual_loss(generated: Tensor | np.ndarray, driving: Tensor | np.ndarray, extractor: FeatureExtractor) -> Tensor:
    """Σ over stages and channels of the mean |F(generated) − F(driving)|, averaged over pyramid scales."""
    generated = as_tensor(generated)
    driving = as_tensor(driving, like=generated)
    if generated.shape != driving.shape:
        raise ShapeMismatchError(f"perceptual_loss: {generated.shape} vs {driving.shape}")
    total: Tensor | None = None
    for scale in extractor.scales:
        fake = extractor(_pyramid_level(generated, scale))
        real = extractor(_pyramid_level(driving, scale))
        for a, b in zip(fake, real):
            term = (a - b).abs().mean(axis=(1, 2)).sum()
            total = term if total is None else total + term
    assert total is not None
    return total * (1.0 / len(extractor.scales))


def mean_absolute_error(generated: Tensor, driving: Tensor | np.ndarray) -> Tensor:
    return (generated - as_tensor(driving, like=generated)).abs().mean()


# ----------------------------------------------------------------------
# Least-squares adversarial losses
# ----------------------------------------------------------------------


def lsgan_generator_loss(fake_scores: Tensor) -> Tensor:
    return ((fake_scores - 1.0) ** 2).mean()


def lsgan_discriminator_loss(real_scores: Tensor, fake_scores: Tensor) -> Tensor:
    return ((real_scores - 1.0) ** 2 + fake_scores**2).mean()


def adversarial_losses(
    generated: Tensor,
    driving: Tensor | np.ndarray,
    discriminator: Discriminator,
    prior: np.ndarray,
) -> tuple[Tensor, Tensor]:
    """``(g_loss, d_loss)``. The discriminator term sees the generated frame detached."""
    fake_scores = discriminator(generated, prior)
    g_loss = lsgan_generator_loss(fake_scores)
    d_loss = lsgan_discriminator_loss(discriminator(driving, prior), discriminator(generated.detach(), prior))
    return g_loss, d_loss


# ----------------------------------------------------------------------
# Equivariance under random thin-plate-spline deformations
# ----------------------------------------------------------------------

_TPS_EPS = 1e-6


class RandomTransform:
    """Random affine + thin-plate-spline map τ on normalized coordinates.

    ``τ(z) = θ[:, :2] z + θ[:, 2] + Σ_j w_j φ(|z − c_j|₁)·(1, 1)`` with
    ``φ(r) = r² log(r + 1e-6)`` and control points on a regular grid.
    """

    def __init__(
        self,
        rng: np.random.Generator,
        *,
        sigma_affine: float = 0.05,
        sigma_tps: float = 0.005,
        points: int = 5,
    ) -> None:
        self.theta = np.eye(2, 3) + rng.normal(0.0, sigma_affine, size=(2, 3))
        grid = F.normalized_grid(points, points).reshape(-1, 2)
        self.control_points = grid
        self.control_params = rng.normal(0.0, sigma_tps, size=len(grid))

    def warp_points(self, points: Tensor | np.ndarray) -> Tensor:
        """Apply τ to ``P×2`` points (differentiable in the points)."""
        points = as_tensor(points)
        n = points.shape[0]
        affine = points @ self.theta[:, :2].T.astype(points.dtype) + self.theta[:, 2].astype(points.dtype)
        diff = points.reshape(n, 1, 2) - self.control_points.reshape(1, -1, 2).astype(points.dtype)
        r = diff.abs().sum(axis=-1)
        phi = r * r * (r + _TPS_EPS).log()
        bend = (phi * self.control_params.astype(points.dtype)).sum(axis=-1)
        return affine + bend.reshape(n, 1)

    def jacobian_at(self, points: Tensor | np.ndarray) -> Tensor:
        """Analytic P×2×2 Jacobian of τ at ``points``, differentiable in the points."""
        points = as_tensor(points)
        n = points.shape[0]
        dtype = points.dtype
        diff = points.reshape(n, 1, 2) - self.control_points.reshape(1, -1, 2).astype(dtype)
        r = diff.abs().sum(axis=-1)
        dphi = r * (r + _TPS_EPS).log() * 2.0 + r * r / (r + _TPS_EPS)
        weighted = (dphi * self.control_params.astype(dtype)).reshape(n, -1, 1)
        grad = (weighted * np.sign(diff.data)).sum(axis=1)  # P×2
        theta = np.broadcast_to(self.theta[:, :2].astype(dtype), (n, 2, 2))
        return grad.reshape(n, 1, 2) + theta

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        """Analytic P×2×2 Jacobian of τ at ``points``."""
        return self.jacobian_at(np.asarray(points, dtype=np.float64)).data

    def warp_frame(self, frame: Tensor | np.ndarray) -> Tensor:
        """Resample a C×H×W frame so its pixel at z shows the input at τ(z)."""
        frame = as_tensor(frame)
        _, height, width = frame.shape
        grid = F.normalized_grid(height, width).reshape(-1, 2)
        mapped = self.warp_points(grid).data
        coords = F.normalized_to_pixels(mapped, (height, width)).reshape(height, width, 2)
        return F.sample_bilinear(frame, coords.astype(frame.dtype))


def equivariance_loss(
    original: KeypointSet,
    fused: Tensor | np.ndarray,
    detector: KeypointDetector,
    transform: RandomTransform,
) -> Tensor:
    """Keypoints of a τ-deformed frame, mapped back through τ, must land on the original keypoints.

    The value term compares positions; the Jacobian term compares
    ``J_orig⁻¹ · Jτ · J_deformed`` with the identity.
    """
    deformed = detector(transform.warp_frame(fused))
    dtype = original.positions.dtype
    mapped = transform.warp_points(deformed.positions)
    value = (original.positions - mapped).abs().mean()

    jac_tau = transform.jacobian_at(deformed.positions)
    normed = inverse_2x2(original.jacobians) @ (jac_tau @ deformed.jacobians)
    jacobian = (np.eye(2, dtype=dtype) - normed).abs().mean()
    return value + jacobian
