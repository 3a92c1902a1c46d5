"""Tests for frame I/O and the checkpoint codec."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from fpmm.shared.checkpoint import (
    DIGEST_BYTES,
    MAGIC,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from fpmm.shared.errors import CheckpointError, ShapeMismatchError
from fpmm.shared.frames import (
    PGM_MAXVAL,
    frame_name,
    load_frame,
    load_image,
    load_video,
    read_pgm,
    save_frame,
    save_video,
    write_pgm,
)

DIGEST = bytes(range(DIGEST_BYTES))


class TestPgm:
    def test_full_scale(self, tmp_path: Path) -> None:
        path = tmp_path / "map.pgm"
        write_pgm(path, np.array([[0.0, 1.0], [0.5, 2.0]]))
        assert path.read_bytes().startswith(b"P5\n2 2\n65535\n")
        samples = np.frombuffer(path.read_bytes()[-8:], dtype=">u2").reshape(2, 2)
        np.testing.assert_array_equal(samples, [[0, PGM_MAXVAL], [32768, PGM_MAXVAL]])

    def test_sixteen_bit_opens_in_pillow(self, tmp_path: Path) -> None:
        path = tmp_path / "map.pgm"
        write_pgm(path, np.array([[0.0, 1.0]]))
        with Image.open(path) as img:
            assert img.format == "PPM"
            assert img.mode == "I"
            assert np.asarray(img).max() == PGM_MAXVAL

    def test_round_trip_precision(self, tmp_path: Path) -> None:
        field = np.random.default_rng(0).uniform(size=(5, 7))
        write_pgm(tmp_path / "f.pgm", field)
        np.testing.assert_allclose(read_pgm(tmp_path / "f.pgm"), field, atol=0.5 / PGM_MAXVAL + 1e-12)

    def test_eight_bit_with_comment(self, tmp_path: Path) -> None:
        path = tmp_path / "small.pgm"
        path.write_bytes(b"P5\n# made by hand\n3 1\n255\n" + bytes([0, 51, 255]))
        np.testing.assert_allclose(read_pgm(path), [[0.0, 0.2, 1.0]])

    def test_scaled_by_header_maxval(self, tmp_path: Path) -> None:
        path = tmp_path / "ten-bit.pgm"
        path.write_bytes(b"P5\n2 1\n1023\n" + np.array([1023, 0], dtype=">u2").tobytes())
        np.testing.assert_allclose(read_pgm(path), [[1.0, 0.0]])

    def test_small_maxval(self, tmp_path: Path) -> None:
        path = tmp_path / "low.pgm"
        path.write_bytes(b"P5\n2 1\n100\n" + bytes([100, 0]))
        np.testing.assert_allclose(read_pgm(path), [[1.0, 0.0]])

    def test_plain_pgm(self, tmp_path: Path) -> None:
        path = tmp_path / "ascii.pgm"
        path.write_bytes(b"P2\n2 1\n255\n0 255\n")
        np.testing.assert_allclose(read_pgm(path), [[0.0, 1.0]])

    def test_not_a_pgm(self, tmp_path: Path) -> None:
        path = tmp_path / "color.pgm"
        Image.fromarray(np.zeros((2, 2, 3), dtype=np.uint8)).save(path, format="PNG")
        with pytest.raises(ValueError, match="not a grayscale PGM"):
            read_pgm(path)

    def test_missing(self, tmp_path: Path) -> None:
        with pytest.raises(FileNotFoundError):
            read_pgm(tmp_path / "absent.pgm")

    def test_needs_2d(self, tmp_path: Path) -> None:
        with pytest.raises(ShapeMismatchError):
            write_pgm(tmp_path / "x.pgm", np.zeros((1, 2, 2)))


class TestFrames:
    def test_name(self) -> None:
        assert frame_name(7) == "frame_0007.png"
        assert frame_name(12, "pgm") == "frame_0012.pgm"

    def test_png_gray_round_trip(self, tmp_path: Path) -> None:
        frame = np.random.default_rng(1).uniform(size=(1, 6, 4))
        save_frame(tmp_path / "f.png", frame)
        loaded = load_frame(tmp_path / "f.png", channels=1)
        assert loaded.shape == (1, 6, 4)
        np.testing.assert_allclose(loaded, frame, atol=0.5 / 255 + 1e-12)

    def test_gray_replicated_to_channels(self, tmp_path: Path) -> None:
        save_frame(tmp_path / "f.png", np.full((1, 2, 2), 0.2))
        frame = load_frame(tmp_path / "f.png", channels=3)
        assert frame.shape == (3, 2, 2)
        np.testing.assert_array_equal(frame[0], frame[2])

    def test_color_png(self, tmp_path: Path) -> None:
        frame = np.zeros((3, 2, 2))
        frame[0] = 1.0
        save_frame(tmp_path / "rgb.png", frame)
        image = load_image(tmp_path / "rgb.png")
        assert image.shape == (2, 2, 3)
        np.testing.assert_array_equal(image[..., 0], 1.0)
        np.testing.assert_array_equal(image[..., 1], 0.0)

    def test_pgm_frame(self, tmp_path: Path) -> None:
        save_frame(tmp_path / "f.pgm", np.full((1, 3, 3), 0.25))
        np.testing.assert_allclose(load_frame(tmp_path / "f.pgm", channels=1), 0.25, atol=1e-5)

    def test_missing_image(self, tmp_path: Path) -> None:
        with pytest.raises(FileNotFoundError):
            load_image(tmp_path / "absent.png")


class TestVideo:
    def test_round_trip(self, tmp_path: Path) -> None:
        frames = [np.full((1, 4, 4), v) for v in (0.0, 0.4, 1.0)]
        manifest = save_video(tmp_path / "v", frames, fps=10.0, fmt="pgm")
        assert manifest.frame_count == 3
        assert manifest.size == (4, 4)
        loaded, read_manifest = load_video(tmp_path / "v", channels=1)
        assert read_manifest == manifest
        for a, b in zip(frames, loaded):
            np.testing.assert_allclose(a, b, atol=1e-5)

    def test_unknown_format(self, tmp_path: Path) -> None:
        with pytest.raises(ValueError, match="format"):
            save_video(tmp_path / "v", [np.zeros((1, 2, 2))], fmt="jpg")

    def test_missing_directory(self, tmp_path: Path) -> None:
        with pytest.raises(FileNotFoundError):
            load_video(tmp_path / "absent")

    def test_no_frames(self, tmp_path: Path) -> None:
        with pytest.raises(ValueError, match="No frame"):
            load_video(tmp_path)

    def test_manifest_count_mismatch(self, tmp_path: Path) -> None:
        save_video(tmp_path / "v", [np.zeros((1, 2, 2))] * 2)
        (tmp_path / "v" / frame_name(2)).unlink()
        with pytest.raises(ValueError):
            load_video(tmp_path / "v", channels=1)

    def test_sizes_must_agree(self, tmp_path: Path) -> None:
        save_frame(tmp_path / frame_name(1), np.zeros((1, 2, 2)))
        save_frame(tmp_path / frame_name(2), np.zeros((1, 3, 3)))
        with pytest.raises(ShapeMismatchError):
            load_video(tmp_path, channels=1)


class TestCheckpointCodec:
    def test_round_trip_keeps_order(self) -> None:
        tensors = [("b.weight", np.arange(6, dtype=np.float32).reshape(2, 3)), ("a.bias", np.array([0.5], np.float32))]
        digest, decoded = decode_checkpoint(encode_checkpoint(tensors, DIGEST))
        assert digest == DIGEST
        assert list(decoded) == ["b.weight", "a.bias"]
        np.testing.assert_array_equal(decoded["b.weight"], tensors[0][1])
        assert decoded["b.weight"].dtype == np.float32

    def test_scalar(self) -> None:
        _, decoded = decode_checkpoint(encode_checkpoint([("s", np.float32(2.0))], DIGEST))
        assert decoded["s"].shape == ()
        assert decoded["s"] == 2.0

    def test_header_layout(self) -> None:
        data = encode_checkpoint([], DIGEST)
        assert data[:4] == MAGIC
        assert struct.unpack_from("<I", data, 4) == (1,)
        assert len(data) == 8 + DIGEST_BYTES

    def test_bad_magic(self) -> None:
        data = b"NOPE" + encode_checkpoint([], DIGEST)[4:]
        with pytest.raises(CheckpointError, match="magic"):
            decode_checkpoint(data)

    def test_bad_version(self) -> None:
        data = MAGIC + struct.pack("<I", 99) + DIGEST
        with pytest.raises(CheckpointError, match="version"):
            decode_checkpoint(data)

    def test_truncated(self) -> None:
        data = encode_checkpoint([("w", np.ones((4, 4), np.float32))], DIGEST)
        with pytest.raises(CheckpointError, match="truncated"):
            decode_checkpoint(data[:-8])
        with pytest.raises(CheckpointError, match="truncated"):
            decode_checkpoint(data[:10])

    def test_digest_length(self) -> None:
        with pytest.raises(CheckpointError):
            encode_checkpoint([], b"short")

    def test_duplicate_names(self) -> None:
        with pytest.raises(CheckpointError, match="Duplicate"):
            encode_checkpoint([("w", np.zeros(1)), ("w", np.zeros(1))], DIGEST)

    def test_digest_mismatch_on_load(self, tmp_path: Path) -> None:
        path = tmp_path / "m.fpmm"
        save_checkpoint(path, [("w", np.zeros(2))], DIGEST)
        assert set(load_checkpoint(path, expected_digest=DIGEST)) == {"w"}
        with pytest.raises(CheckpointError, match="different architecture"):
            load_checkpoint(path, expected_digest=bytes(DIGEST_BYTES))
