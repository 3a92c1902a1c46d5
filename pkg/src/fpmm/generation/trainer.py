"""One training step and the training loop with its CSV log."""

from __future__ import annotations

import csv
import logging
import math
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from fpmm.engine.autograd import gradients
from fpmm.engine.optim import Adam
from fpmm.engine.tensor import Tensor
from fpmm.generation.losses import (
    RandomTransform,
    adversarial_losses,
    equivariance_loss,
    mean_absolute_error,
    perceptual_loss,
)
from fpmm.generation.model import MotionTransferModel
from fpmm.prior.prior_map import fuse
from fpmm.schemas.config import LossWeights
from fpmm.schemas.reports import LOG_COLUMNS, LossReport
from fpmm.shared.errors import NonFiniteError, TrainingDivergedError

if TYPE_CHECKING:
    from fpmm.shared.progress import RunProgress

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingSample:
    """Two frames of one clip plus the clip's prior map (from its onset landmarks)."""

    target: np.ndarray
    driving: np.ndarray
    prior: np.ndarray


@dataclass
class Optimizers:
    generator: Adam
    discriminator: Adam

    @classmethod
    def for_model(cls, model: MotionTransferModel) -> "Optimizers":
        cfg = model.config
        kwargs = {"lr": cfg.learning_rate, "betas": (cfg.beta1, cfg.beta2), "eps": cfg.adam_eps}
        return cls(
            generator=Adam(model.generator_parameters(), **kwargs),
            discriminator=Adam(model.discriminator_parameters(), **kwargs),
        )


@contextmanager
def _loss_term(name: str, step: int) -> Iterator[None]:
    """Re-raise a non-finite op inside one loss term as divergence of that term."""
    try:
        yield
    except NonFiniteError as exc:
        raise TrainingDivergedError(name, step) from exc


def _checked(value: Tensor, name: str, step: int) -> float:
    out = value.item()
    if not math.isfinite(out):
        raise TrainingDivergedError(name, step)
    return out


def train_step(
    model: MotionTransferModel,
    optimizers: Optimizers,
    batch: Sequence[TrainingSample],
    weights: LossWeights,
    *,
    step: int = 1,
    seed: int = 0,
) -> LossReport:
    """One generator + motion update followed by one discriminator update.

    Per-sample losses are summed in batch order and divided by the batch
    size. The random equivariance deformations come from ``(seed, step)``,
    so the step is deterministic.
    """
    if not batch:
        raise ValueError("train_step needs at least one sample")
    if not weights.perceptual > max(weights.mae, weights.adversarial, weights.equivariance):
        raise ValueError("The perceptual loss weight must be strictly greater than every other weight")
    cfg = model.config
    rng = np.random.default_rng([seed, step])
    scale = 1.0 / len(batch)
    sums = dict.fromkeys(("perceptual", "mae", "adversarial_g", "adversarial_d", "equivariance"), 0.0)
    total: Tensor | None = None
    d_total: Tensor | None = None

    for sample in batch:
        with _loss_term("keypoints", step):
            target_kp = model.detect(sample.target, sample.prior)
            driving_kp = model.detect(sample.driving, sample.prior)
        with _loss_term("motion", step):
            generated = model.transfer(sample.target, target_kp, driving_kp).frame
        with _loss_term("perceptual", step):
            perceptual = perceptual_loss(generated, model.tensor(sample.driving), model.extractor)
        with _loss_term("mae", step):
            mae = mean_absolute_error(generated, model.tensor(sample.driving))
        with _loss_term("adversarial", step):
            adv_g, adv_d = adversarial_losses(
                generated, model.tensor(sample.driving), model.discriminator, model.prior_input(sample.prior)
            )
        terms = {"perceptual": perceptual, "mae": mae, "adversarial_g": adv_g, "adversarial_d": adv_d}
        objective = perceptual * weights.perceptual + mae * weights.mae + adv_g * weights.adversarial

        if weights.equivariance > 0:
            transform = RandomTransform(
                rng, sigma_affine=cfg.tps_sigma_affine, sigma_tps=cfg.tps_sigma_tps, points=cfg.tps_points
            )
            with _loss_term("equivariance", step):
                fused = fuse(np.asarray(sample.driving, dtype=cfg.dtype), model.prior_input(sample.prior)).data
                equivariance = equivariance_loss(driving_kp, fused, model.detector, transform)
            terms["equivariance"] = equivariance
            objective = objective + equivariance * weights.equivariance

        for name, value in terms.items():
            sums[name] += _checked(value, name, step) * scale
        total = objective if total is None else total + objective
        d_total = adv_d if d_total is None else d_total + adv_d

    assert total is not None
    loss = total * scale
    total_value = _checked(loss, "total", step)
    gen_params = optimizers.generator.tensors
    optimizers.generator.step(gradients(loss, gen_params))

    # The generator step does not touch discriminator parameters.
    assert d_total is not None
    optimizers.discriminator.step(gradients(d_total * scale, optimizers.discriminator.tensors))

    return LossReport(
        step=step,
        perceptual=sums["perceptual"],
        reconstruction_mae=sums["mae"],
        adversarial_g=sums["adversarial_g"],
        adversarial_d=sums["adversarial_d"],
        equivariance=sums["equivariance"],
        total=total_value,
        weights=weights,
    )


class TrainingLog:
    """Append-only CSV: ``step,perceptual,mae,adv_g,adv_d,total``."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists() or self.path.stat().st_size == 0:
            with self.path.open("w", newline="") as fh:
                csv.writer(fh).writerow(LOG_COLUMNS)

    def append(self, report: LossReport) -> None:
        with self.path.open("a", newline="") as fh:
            csv.writer(fh).writerow(report.log_row())

    def read(self) -> list[dict[str, float]]:
        with self.path.open(newline="") as fh:
            return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


BatchSampler = Callable[[np.random.Generator, int], Sequence[TrainingSample]]


class Trainer:
    """Runs ``config.steps`` training steps over batches drawn from ``sample_batch``."""

    def __init__(
        self,
        model: MotionTransferModel,
        sample_batch: BatchSampler,
        *,
        log_path: str | Path | None = None,
    ) -> None:
        self.model = model
        self.config = model.config
        self.sample_batch = sample_batch
        self.optimizers = Optimizers.for_model(model)
        self.weights = self.config.loss_weights()
        self.log = TrainingLog(log_path) if log_path else None
        self._data_rng = np.random.default_rng(self.config.seed)
        self.step = 0

    def run(self, steps: int | None = None, progress: RunProgress | None = None) -> list[LossReport]:
        steps = self.config.steps if steps is None else steps
        reports: list[LossReport] = []
        if progress:
            progress.start_task("Training", total=steps)
        try:
            for _ in range(steps):
                self.step += 1
                batch = self.sample_batch(self._data_rng, self.config.batch_size)
                report = train_step(
                    self.model, self.optimizers, batch, self.weights, step=self.step, seed=self.config.seed
                )
                reports.append(report)
                if self.log:
                    self.log.append(report)
                if self.step % self.config.log_every == 0 or self.step == 1:
                    logger.info(
                        "step %d: total %.4f perceptual %.4f mae %.4f adv_g %.4f adv_d %.4f",
                        self.step, report.total, report.perceptual, report.reconstruction_mae,
                        report.adversarial_g, report.adversarial_d,
                    )
                    if progress:
                        progress.log_event(
                            f"step {self.step}", f"total {report.total:.4f} mae {report.reconstruction_mae:.4f}"
                        )
                if progress:
                    progress.update_task("Training", f"total {report.total:.4f}", advance=1)
        except TrainingDivergedError as exc:
            if progress:
                progress.fail_task("Training", str(exc))
            raise
        if progress:
            progress.finish_task("Training")
        return reports
