"""All networks of one motion-transfer model, built from a ``Config``."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fpmm.engine.nn import Module
from fpmm.engine.tensor import Tensor, as_tensor
from fpmm.generation.discriminator import Discriminator
from fpmm.generation.generator import Generator
from fpmm.generation.losses import FeatureExtractor
from fpmm.motion.dense import DenseMotion, DenseMotionNetwork
from fpmm.motion.keypoints import KeypointDetector, KeypointSet
from fpmm.motion.sparse import compose_sparse
from fpmm.prior.prior_map import fuse
from fpmm.schemas.config import Config
from fpmm.shared.checkpoint import load_checkpoint, save_checkpoint
from fpmm.shared.errors import CheckpointError

logger = logging.getLogger(__name__)

# Offset between the model seed and the feature extractor's own seed.
_EXTRACTOR_SEED_OFFSET = 7919


@dataclass(frozen=True)
class Transfer:
    """Result of rendering a target under driving keypoints."""

    frame: Tensor
    motion: DenseMotion


class MotionTransferModel(Module):
    """Keypoint detector, dense motion network, generator, discriminator and feature extractor."""

    def __init__(self, config: Config) -> None:
        self.config = config
        dtype = config.dtype
        rng = np.random.default_rng(config.seed)
        c = config.channels
        self.detector = KeypointDetector(
            c + 1,
            config.num_keypoints,
            rng,
            block_expansion=config.block_expansion,
            num_blocks=config.num_blocks,
            max_features=config.max_features,
            temperature=config.temperature,
            downsample=config.motion_downsample,
            dtype=dtype,
        )
        self.dense_motion = DenseMotionNetwork(
            c,
            config.num_keypoints,
            rng,
            block_expansion=config.block_expansion,
            num_blocks=config.num_blocks,
            max_features=config.max_features,
            downsample=config.motion_downsample,
            heatmap_variance=config.heatmap_variance,
            dtype=dtype,
        )
        self.generator = Generator(
            c, rng, base_channels=config.generator_channels, residual_blocks=config.residual_blocks, dtype=dtype
        )
        self.discriminator = Discriminator(
            c, rng, base_channels=config.discriminator_channels, num_layers=config.discriminator_layers, dtype=dtype
        )
        self.extractor = FeatureExtractor(
            c,
            config.feature_channels,
            scales=config.pyramid_scales,
            seed=config.seed + _EXTRACTOR_SEED_OFFSET,
            dtype=dtype,
        )
        if config.feature_weights_file:
            self.extractor.load_weights(config.feature_weights_file)
        logger.debug("Built model with %d parameters", self.num_parameters())

    # ------------------------------------------------------------------
    # Parameter groups
    # ------------------------------------------------------------------

    def generator_parameters(self) -> list[tuple[str, Tensor]]:
        """Parameters updated by the generator step: detector, dense motion, generator."""
        return (
            self.detector.named_parameters("detector.")
            + self.dense_motion.named_parameters("dense_motion.")
            + self.generator.named_parameters("generator.")
        )

    def discriminator_parameters(self) -> list[tuple[str, Tensor]]:
        return self.discriminator.named_parameters("discriminator.")

    # ------------------------------------------------------------------
    # Inference
    # ------------------------------------------------------------------

    def tensor(self, array: np.ndarray | Tensor) -> Tensor:
        """Cast raw arrays to the model's precision."""
        return as_tensor(array if isinstance(array, Tensor) else np.asarray(array, dtype=self.config.dtype))

    def prior_input(self, prior: np.ndarray) -> np.ndarray:
        """The prior channel the networks see: ``prior``, or zeros when the prior is disabled."""
        prior = np.asarray(prior, dtype=self.config.dtype)
        return prior if self.config.use_prior else np.zeros_like(prior)

    def detect(self, frame: np.ndarray | Tensor, prior: np.ndarray) -> KeypointSet:
        data = frame.data if isinstance(frame, Tensor) else frame
        return self.detector(fuse(np.asarray(data, dtype=self.config.dtype), self.prior_input(prior)))

    def transfer(self, target: np.ndarray | Tensor, target_kp: KeypointSet, driving_kp: KeypointSet) -> Transfer:
        """Render ``target`` posed as ``driving_kp``; ``target_kp`` are the target's own keypoints."""
        target = self.tensor(target)
        sparse = compose_sparse(target_kp, driving_kp)
        dense = self.dense_motion(target, sparse)
        motion = dense.resized(self.generator.feature_size(target.shape[1:]))
        return Transfer(frame=self.generator(target, motion), motion=dense)

    def autoencode(self, target: np.ndarray | Tensor) -> Tensor:
        return self.generator.autoencode(self.tensor(target))

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def state(self) -> list[tuple[str, np.ndarray]]:
        return [(name, t.data) for name, t in self.named_tensors()]

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        own = dict(self.named_tensors())
        missing = sorted(set(own) - set(tensors))
        unexpected = sorted(set(tensors) - set(own))
        if missing or unexpected:
            raise CheckpointError(f"Checkpoint tensors do not match the model (missing {missing[:3]}, unexpected {unexpected[:3]})")
        for name, tensor in own.items():
            if tensors[name].shape != tensor.shape:
                raise CheckpointError(f"Tensor '{name}' has shape {tensors[name].shape}, expected {tensor.shape}")
            tensor.data = tensors[name].astype(tensor.dtype)

    def save(self, path: str | Path) -> None:
        save_checkpoint(path, self.state(), self.config.digest())

    @classmethod
    def load(cls, path: str | Path, config: Config) -> "MotionTransferModel":
        tensors = load_checkpoint(path, expected_digest=config.digest())
        model = cls(config)
        model.load_state(tensors)
        return model


def build_model(config: Config) -> MotionTransferModel:
    return MotionTransferModel(config)
