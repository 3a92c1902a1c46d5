"""Tests for the command-line entry points and their exit codes."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from PIL import Image
from typer.testing import CliRunner

from fpmm.cli import EXIT_NUMERIC, EXIT_VALIDATION, app
from fpmm.config import save_sidecar
from fpmm.data.scene import RenderedScene
from fpmm.generation.model import build_model
from fpmm.schemas.config import Config
from fpmm.schemas.landmarks import LandmarkSequence
from fpmm.shared.frames import read_pgm, save_frame, save_video

from tests.conftest import make_landmarks

runner = CliRunner()


def _generation_inputs(root: Path, scene: RenderedScene) -> list[str]:
    save_frame(root / "target.png", scene.frames[0])
    scene.landmarks[0].save(root / "target.json")
    save_video(root / "driving", scene.frames)
    LandmarkSequence(scene.landmarks).save(root / "driving" / "landmarks.json")
    return [
        "--target", str(root / "target.png"),
        "--target-landmarks", str(root / "target.json"),
        "--driving", str(root / "driving"),
        "--out", str(root / "result"),
    ]


class TestValidate:
    def test_valid(self, tmp_config: Path) -> None:
        result = runner.invoke(app, ["validate", "--config", str(tmp_config)])
        assert result.exit_code == 0
        assert "Config is valid" in result.output

    def test_invalid(self, tmp_path: Path) -> None:
        bad = tmp_path / "bad.yml"
        bad.write_text("weight_perceptual: 0.5\n")
        result = runner.invoke(app, ["validate", "--config", str(bad)])
        assert result.exit_code == EXIT_VALIDATION

    def test_missing(self, tmp_path: Path) -> None:
        result = runner.invoke(app, ["validate", "--config", str(tmp_path / "absent.yml")])
        assert result.exit_code == EXIT_VALIDATION


class TestPrior:
    def test_writes_map_and_preview(self, tmp_path: Path) -> None:
        make_landmarks((20.0, 30.0), (44.0, 30.0), size=(64, 64)).save(tmp_path / "face.json")
        out = tmp_path / "prior.pgm"
        result = runner.invoke(app, ["prior", "--landmarks", str(tmp_path / "face.json"), "--size", "32", "32", "--out", str(out)])
        assert result.exit_code == 0, result.output
        field = read_pgm(out)
        assert field.shape == (32, 32)
        assert field.max() == 1.0
        with Image.open(out) as img:
            assert img.mode == "I"
        assert (tmp_path / "prior.preview.png").exists()

    def test_coincident_eyes(self, tmp_path: Path) -> None:
        make_landmarks((30.0, 30.0), (30.0, 30.0), size=(64, 64)).save(tmp_path / "face.json")
        result = runner.invoke(app, ["prior", "--landmarks", str(tmp_path / "face.json"), "--out", str(tmp_path / "p.pgm")])
        assert result.exit_code == EXIT_VALIDATION

    def test_bad_exponent_form(self, tmp_path: Path) -> None:
        make_landmarks((20.0, 30.0), (44.0, 30.0), size=(64, 64)).save(tmp_path / "face.json")
        result = runner.invoke(
            app, ["prior", "--landmarks", str(tmp_path / "face.json"), "--out", str(tmp_path / "p.pgm"), "--exponent-form", "cubic"]
        )
        assert result.exit_code == EXIT_VALIDATION


class TestEval:
    def test_metrics_and_report(self, tmp_path: Path) -> None:
        save_video(tmp_path / "ref", [np.full((1, 4, 4), v) for v in (0.2, 0.6, 0.4)])
        save_video(tmp_path / "gen", [np.full((1, 4, 4), v) for v in (0.2, 0.5, 0.4)])
        out = tmp_path / "eval" / "metrics.csv"
        html = tmp_path / "eval" / "report.html"
        result = runner.invoke(
            app, ["eval", "--generated", str(tmp_path / "gen"), "--reference", str(tmp_path / "ref"), "--out", str(out), "--html", str(html)]
        )
        assert result.exit_code == 0, result.output
        assert out.read_text().splitlines()[0] == "frame,l1,psnr"
        assert (tmp_path / "eval" / "diff_reference.png").exists()
        assert "Per-frame metrics" in html.read_text()

    def test_baseline_scored_against_same_reference(self, tmp_path: Path) -> None:
        save_video(tmp_path / "ref", [np.full((1, 4, 4), v) for v in (0.2, 0.6, 0.4)])
        save_video(tmp_path / "gen", [np.full((1, 4, 4), v) for v in (0.2, 0.6, 0.4)])
        save_video(tmp_path / "base", [np.full((1, 4, 4), 0.2)] * 3)
        out = tmp_path / "metrics.csv"
        result = runner.invoke(
            app,
            [
                "eval", "--generated", str(tmp_path / "gen"), "--reference", str(tmp_path / "ref"),
                "--out", str(out), "--baseline", str(tmp_path / "base"),
            ],
        )
        assert result.exit_code == 0, result.output
        assert "Baseline: mean L1 0.200000" in result.output
        rows = (tmp_path / "metrics_baseline.csv").read_text().splitlines()
        assert rows[0] == "frame,l1,psnr"
        assert len(rows) == 4

    def test_frame_count_mismatch(self, tmp_path: Path) -> None:
        save_video(tmp_path / "ref", [np.zeros((1, 4, 4))] * 3)
        save_video(tmp_path / "gen", [np.zeros((1, 4, 4))] * 2)
        result = runner.invoke(
            app, ["eval", "--generated", str(tmp_path / "gen"), "--reference", str(tmp_path / "ref"), "--out", str(tmp_path / "m.csv")]
        )
        assert result.exit_code == EXIT_VALIDATION


class TestGenerate:
    def test_non_finite_weights_exit_numeric(self, tmp_path: Path, tiny_config: Config, tiny_scene: RenderedScene) -> None:
        model = build_model(tiny_config)
        model.generator.final.bias.data = np.full_like(model.generator.final.bias.data, np.nan)
        checkpoint = tmp_path / "model.fpmm"
        model.save(checkpoint)
        save_sidecar(tiny_config, checkpoint)
        result = runner.invoke(app, ["generate", "--checkpoint", str(checkpoint), *_generation_inputs(tmp_path, tiny_scene)])
        assert result.exit_code == EXIT_NUMERIC

    def test_missing_checkpoint(self, tmp_path: Path, tmp_config: Path, tiny_scene: RenderedScene) -> None:
        result = runner.invoke(
            app,
            ["generate", "--checkpoint", str(tmp_path / "absent.fpmm"), "--config", str(tmp_config), *_generation_inputs(tmp_path, tiny_scene)],
        )
        assert result.exit_code == EXIT_VALIDATION

    def test_architecture_mismatch(self, tmp_path: Path, tiny_config: Config, tiny_scene: RenderedScene) -> None:
        checkpoint = tmp_path / "model.fpmm"
        build_model(tiny_config).save(checkpoint)
        other = tmp_path / "other.json"
        other.write_text(tiny_config.model_copy(update={"num_keypoints": 4}).model_dump_json())
        result = runner.invoke(
            app, ["generate", "--checkpoint", str(checkpoint), "--config", str(other), *_generation_inputs(tmp_path, tiny_scene)]
        )
        assert result.exit_code == EXIT_VALIDATION


@pytest.mark.slow
class TestEndToEnd:
    def test_synth_train_generate_eval(self, tmp_path: Path, tmp_config: Path) -> None:
        data = tmp_path / "data"
        result = runner.invoke(app, ["synth", "--out", str(data), "--clips", "2", "--frames", "4", "--size", "16"])
        assert result.exit_code == 0, result.output
        assert "Synthesizing 2 clips of 4 frames" in result.output

        checkpoint = tmp_path / "model.fpmm"
        result = runner.invoke(
            app, ["train", "--data", str(data), "--out", str(checkpoint), "--config", str(tmp_config), "--steps", "2"]
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "model.fpmm.config.json").exists()
        assert len((tmp_path / "model.fpmm.log.csv").read_text().splitlines()) == 3
        assert "clips for 2 steps" in result.output
        assert "step 1:" in result.output
        assert "step 2:" in result.output

        clip = data / "clip_001"
        result = runner.invoke(
            app,
            [
                "generate", "--checkpoint", str(checkpoint),
                "--target", str(clip / "frame_0001.png"),
                "--target-landmarks", str(clip / "landmarks.json"),
                "--driving", str(data / "clip_002"),
                "--out", str(tmp_path / "result"),
                "--threads", "2",
            ],
        )
        assert result.exit_code == 0, result.output
        assert len(list((tmp_path / "result").glob("frame_*.png"))) == 4
        assert "Generating onset-relative" in result.output

        result = runner.invoke(
            app,
            ["eval", "--generated", str(tmp_path / "result"), "--reference", str(data / "clip_002"), "--out", str(tmp_path / "m.csv")],
        )
        assert result.exit_code == 0, result.output
