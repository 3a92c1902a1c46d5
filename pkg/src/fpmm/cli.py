"""Typer CLI: ``fpmm prior | train | generate | eval | synth | validate``."""

from __future__ import annotations

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import numpy as np
import typer
from rich.console import Console

from fpmm.config import keypoint_spec_for, load_config, save_sidecar, sidecar_path
from fpmm.schemas.config import Config
from fpmm.shared.errors import NumericError

app = typer.Typer(
    name="fpmm",
    help="Facial-prior motion transfer: animate a face image with the micro-motion of a driving clip.",
    no_args_is_help=True,
)
console = Console()

EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


def _setup_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        datefmt="%H:%M:%S",
    )
    # Pillow logs every chunk it parses at DEBUG
    logging.getLogger("PIL").setLevel(logging.WARNING)


@contextmanager
def _exit_codes() -> Iterator[None]:
    """Map validation failures to exit code 2 and numeric failures to exit code 3."""
    try:
        yield
    except NumericError as exc:
        console.print(f"[red]Numeric failure:[/] {exc}")
        raise typer.Exit(code=EXIT_NUMERIC)
    except (FileNotFoundError, ValueError) as exc:
        # pydantic.ValidationError, ShapeMismatchError, PriorMapError and CheckpointError are ValueErrors
        console.print(f"[red]Error:[/] {exc}")
        raise typer.Exit(code=EXIT_VALIDATION)


def _load_config(path: Optional[Path], **overrides: object) -> Config:
    try:
        return load_config(path, overrides)
    except (FileNotFoundError, ValueError) as exc:
        console.print(f"[red]Config validation failed:[/] {exc}")
        raise typer.Exit(code=EXIT_VALIDATION)


@app.command()
def validate(
    config: Path = typer.Option(..., "--config", "-c", help="Path to a train/generate config (YAML or JSON)."),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
) -> None:
    """Validate a configuration file without running anything."""
    _setup_logging(verbose)
    cfg = _load_config(config)

    weights = cfg.loss_weights()
    console.print("[green]Config is valid![/]\n")
    console.print(f"  Image size:   {cfg.image_size}×{cfg.image_size} ({cfg.channels} channels, {cfg.precision})")
    console.print(f"  Keypoints:    {cfg.num_keypoints} (temperature {cfg.temperature:g})")
    console.print(f"  Prior:        {cfg.exponent_form} form, sigma {cfg.prior_sigma or 'derived'}")
    console.print(
        f"  Loss weights: perceptual {weights.perceptual:g}, mae {weights.mae:g}, "
        f"adversarial {weights.adversarial:g}, equivariance {weights.equivariance:g}"
    )
    console.print(f"  Optimizer:    Adam lr {cfg.learning_rate:g}, betas ({cfg.beta1:g}, {cfg.beta2:g})")
    console.print(f"  Training:     {cfg.steps} steps, batch {cfg.batch_size}, seed {cfg.seed}")
    console.print(f"  Mode:         {cfg.mode}")


@app.command()
def prior(
    landmarks: Path = typer.Option(..., "--landmarks", "-l", help="Landmark JSON (one set, or a per-frame list whose first set is used)."),
    out: Path = typer.Option(..., "--out", "-o", help="Output 16-bit PGM of the normalized prior map."),
    spec: Optional[Path] = typer.Option(None, "--spec", help="Keypoint spec JSON; defaults to the built-in spec."),
    size: tuple[int, int] = typer.Option((0, 0), "--size", help="Output height and width; defaults to the landmarks' image size."),
    sigma: Optional[float] = typer.Option(None, "--sigma", help="Kernel width in pixels; derived from the size when omitted."),
    exponent_form: str = typer.Option("distance", "--exponent-form", help="'distance' (exp(-d/2σ²)) or 'squared' (exp(-d²/2σ²))."),
    image: Optional[Path] = typer.Option(None, "--image", help="Frame to show next to the map in the fused preview."),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
) -> None:
    """Synthesize the region-focusing prior map from facial landmarks.

    Writes the map as a 16-bit PGM and a ``<out>.preview.png`` showing the
    frame (when given) beside the map.

    Example:

        fpmm prior --landmarks face.json --size 256 256 --out prior.pgm
    """
    from fpmm.data.preprocess import preprocess
    from fpmm.prior.prior_map import fuse, prior_from_landmarks
    from fpmm.schemas.landmarks import KeypointSpec, default_keypoint_spec, load_onset_landmarks
    from fpmm.shared.frames import load_image, save_frame, write_pgm

    _setup_logging(verbose)
    with _exit_codes():
        if exponent_form not in ("distance", "squared"):
            raise ValueError(f"--exponent-form must be 'distance' or 'squared', got '{exponent_form}'")
        lm = load_onset_landmarks(landmarks)
        keypoint_spec = KeypointSpec.load(spec) if spec else default_keypoint_spec()
        out_size = tuple(size) if all(size) else lm.image_size
        result = prior_from_landmarks(lm, keypoint_spec, out_size, sigma=sigma, exponent_form=exponent_form)

        out.parent.mkdir(parents=True, exist_ok=True)
        write_pgm(out, result.map)
        panels = [result.map]
        if image is not None:
            frame = preprocess(load_image(image), size=out_size, channels=1)
            fused = fuse(frame, result)
            panels = [fused.frame()[0], fused.prior()]
        preview = out.with_name(out.stem + ".preview.png")
        save_frame(preview, np.concatenate(panels, axis=1))

    console.print(f"[green]Prior map written:[/] {out} ({out_size[0]}×{out_size[1]}, sigma {result.sigma:.4g})")
    console.print(f"  Preview: {preview}")


@app.command()
def synth(
    out: Path = typer.Option(..., "--out", "-o", help="Directory for the synthetic dataset."),
    clips: int = typer.Option(20, "--clips", min=1, help="Number of clips."),
    frames: int = typer.Option(16, "--frames", min=2, help="Frames per clip."),
    size: int = typer.Option(64, "--size", min=16, help="Frame height and width."),
    seed: int = typer.Option(0, "--seed", help="Random seed."),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
) -> None:
    """Render a synthetic micro-expression dataset with ground-truth landmarks."""
    from fpmm.data.dataset import build_synthetic_dataset
    from fpmm.shared.progress import RunProgress

    _setup_logging(verbose)
    with _exit_codes(), RunProgress("Synthesis", enabled=not verbose) as progress:
        progress.print_phase(f"Synthesizing {clips} clips of {frames} frames at {size}×{size}")
        manifest = build_synthetic_dataset(out, clips=clips, frames=frames, size=size, seed=seed, progress=progress)
    console.print(f"[green]Wrote {len(manifest.clips)} clips to[/] {out}")


@app.command()
def train(
    data: Path = typer.Option(..., "--data", "-d", help="Dataset manifest (dataset.json or its directory)."),
    out: Path = typer.Option(..., "--out", "-o", help="Checkpoint file to write."),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Config file; defaults apply when omitted."),
    steps: Optional[int] = typer.Option(None, "--steps", min=0, help="Override the configured number of steps."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override the configured seed."),
    log: Optional[Path] = typer.Option(None, "--log", help="Training log CSV; defaults to <out>.log.csv."),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
) -> None:
    """Train all networks on a dataset and write a checkpoint plus a CSV loss log."""
    from fpmm.data.dataset import ClipDataset
    from fpmm.generation.model import build_model
    from fpmm.generation.trainer import Trainer
    from fpmm.shared.progress import RunProgress

    _setup_logging(verbose)
    cfg = _load_config(config, steps=steps, seed=seed)
    log_path = log or out.with_name(out.name + ".log.csv")

    with _exit_codes():
        dataset = ClipDataset.load(data, cfg, keypoint_spec_for(cfg))
        model = build_model(cfg)
        trainer = Trainer(model, dataset.sample_batch, log_path=log_path)
        with RunProgress("Training", enabled=not verbose) as progress:
            progress.print_phase(f"Training {model.num_parameters()} parameters on {len(dataset)} clips for {cfg.steps} steps")
            reports = trainer.run(progress=progress)
        out.parent.mkdir(parents=True, exist_ok=True)
        model.save(out)
        save_sidecar(cfg, out)

    if reports:
        first, last = reports[0], reports[-1]
        console.print(f"  Total loss: {first.total:.4f} (step 1) → {last.total:.4f} (step {last.step})")
    console.print(f"[green]Checkpoint written:[/] {out}")
    console.print(f"  Config: {sidecar_path(out)}")
    console.print(f"  Log:    {log_path}")


@app.command()
def generate(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Trained checkpoint."),
    target: Path = typer.Option(..., "--target", "-t", help="Target face image."),
    target_landmarks: Path = typer.Option(..., "--target-landmarks", help="Landmark JSON of the target image."),
    driving: Path = typer.Option(..., "--driving", help="Driving frame directory."),
    out: Path = typer.Option(..., "--out", "-o", help="Output frame directory."),
    driving_landmarks: Optional[Path] = typer.Option(None, "--driving-landmarks", help="Driving landmark JSON; defaults to <driving>/landmarks.json."),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Config; defaults to the checkpoint's sidecar."),
    mode: Optional[str] = typer.Option(None, "--mode", help="'onset-relative' (default) or 'inter-frame'."),
    fmt: str = typer.Option("png", "--format", help="Output frame format: png or pgm."),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Frame workers (onset-relative mode)."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override the configured seed."),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
) -> None:
    """Animate a target image with the motion of a driving clip.

    Example:

        fpmm generate --checkpoint model.fpmm --target face.png --target-landmarks face.json --driving clip/ --out result/
    """
    from fpmm.generation.model import MotionTransferModel
    from fpmm.pipeline.animate import run_job
    from fpmm.schemas.pipeline import GenerationJob
    from fpmm.shared.progress import RunProgress

    _setup_logging(verbose)
    if config is None and sidecar_path(checkpoint).exists():
        config = sidecar_path(checkpoint)
    cfg = _load_config(config, mode=mode, threads=threads, seed=seed)

    with _exit_codes():
        job = GenerationJob(
            target_image=target,
            target_landmarks=target_landmarks,
            driving_dir=driving,
            driving_landmarks=driving_landmarks,
            checkpoint=checkpoint,
            output_dir=out,
            mode=cfg.mode,
            output_format=fmt,
        )
        model = MotionTransferModel.load(checkpoint, cfg)
        with RunProgress("Generation", enabled=not verbose) as progress:
            progress.print_phase(f"Generating {cfg.mode} from {driving}")
            manifest = run_job(job, model, threads=cfg.threads, progress=progress)

    console.print(f"[green]Generated {manifest.frame_count} frames[/] ({cfg.mode}) into {out}")


@app.command("eval")
def evaluate_cmd(
    generated: Path = typer.Option(..., "--generated", help="Generated frame directory."),
    reference: Path = typer.Option(..., "--reference", help="Reference frame directory."),
    out: Path = typer.Option(..., "--out", "-o", help="Metrics CSV; difference images go next to it."),
    html: Optional[Path] = typer.Option(None, "--html", help="Also write an HTML report here."),
    channels: int = typer.Option(1, "--channels", min=1, help="Channels to load frames with."),
    baseline: Optional[Path] = typer.Option(
        None, "--baseline", help="Frames of a second model (e.g. trained with use_prior: false) to score against the same reference."
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
) -> None:
    """Per-frame L1 and PSNR of a generated video against a reference, with difference images."""
    from fpmm.output.report import write_report
    from fpmm.pipeline.evaluate import evaluate, write_metrics_csv
    from fpmm.shared.frames import load_video

    _setup_logging(verbose)
    with _exit_codes():
        gen_frames, _ = load_video(generated, channels)
        ref_frames, _ = load_video(reference, channels)
        report = evaluate(gen_frames, ref_frames, out_dir=out.parent)
        report = report.model_copy(update={"generated_dir": str(generated), "reference_dir": str(reference)})
        write_metrics_csv(report, out)
        if html is not None:
            if html.parent.resolve() != out.parent.resolve():
                report = report.model_copy(
                    update={"difference_images": [str((out.parent / n).resolve()) for n in report.difference_images]}
                )
            write_report(report, html)
        baseline_report = None
        if baseline is not None:
            base_frames, _ = load_video(baseline, channels)
            baseline_report = evaluate(base_frames, ref_frames)
            baseline_report = baseline_report.model_copy(
                update={"generated_dir": str(baseline), "reference_dir": str(reference)}
            )
            write_metrics_csv(baseline_report, out.with_name(f"{out.stem}_baseline{out.suffix}"))

    console.print(f"[green]Evaluated {len(report.frames)} frames[/]: mean L1 {report.mean_l1:.6f}, mean PSNR {report.mean_psnr:.2f} dB")
    console.print(f"  Peak-motion frame: {report.peak_frame}")
    console.print(f"  Metrics: {out}")
    if baseline_report is not None:
        console.print(
            f"  Baseline: mean L1 {baseline_report.mean_l1:.6f}, mean PSNR {baseline_report.mean_psnr:.2f} dB "
            f"(L1 difference {report.mean_l1 - baseline_report.mean_l1:+.6f})"
        )
    if html is not None:
        console.print(f"  Report:  {html}")
