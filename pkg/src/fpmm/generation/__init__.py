"""Expression generation: generator, discriminator, losses, model assembly and training."""

from fpmm.generation.generator import Generator, generate_frame
from fpmm.generation.losses import adversarial_losses, perceptual_loss
from fpmm.generation.model import MotionTransferModel, build_model
from fpmm.generation.trainer import Trainer, TrainingSample, train_step

__all__ = [
    "Generator",
    "MotionTransferModel",
    "Trainer",
    "TrainingSample",
    "adversarial_losses",
    "build_model",
    "generate_frame",
    "perceptual_loss",
    "train_step",
]
