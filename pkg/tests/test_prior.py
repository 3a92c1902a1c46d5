"""Tests for keypoint modification, prior map synthesis and fusion."""

from __future__ import annotations

import math

import numpy as np
import pytest

from fpmm.data.scene import eye_centers as scripted_eye_centers
from fpmm.data.scene import render_scene
from fpmm.prior.prior_map import (
    default_sigma,
    eye_centers,
    fuse,
    keypoint_field,
    modify_keypoints,
    prior_from_landmarks,
    pupillary_distance,
    raw_prior,
    synthesize_prior,
)
from fpmm.schemas.landmarks import KeypointSpec, default_keypoint_spec
from fpmm.schemas.scene import SceneScript
from fpmm.shared.errors import PriorMapError, ShapeMismatchError
from tests.conftest import make_landmarks


class TestPupillaryDistance:
    def test_horizontal(self) -> None:
        assert pupillary_distance(make_landmarks((100, 120), (160, 120))) == pytest.approx(60.0, abs=1e-12)

    def test_three_four_five(self) -> None:
        assert pupillary_distance(make_landmarks((0, 0), (3, 4))) == pytest.approx(5.0, abs=1e-12)

    def test_degenerate(self) -> None:
        with pytest.raises(PriorMapError):
            pupillary_distance(make_landmarks((50, 50), (50, 50)))

    def test_matches_synthetic_scene(self) -> None:
        script = SceneScript(size=(64, 64))
        landmarks = render_scene(script, channels=1).landmarks[0]
        right, left = scripted_eye_centers(script.face, script.size)
        got_right, got_left = eye_centers(landmarks)
        np.testing.assert_allclose(got_right, right, atol=1e-9)
        np.testing.assert_allclose(got_left, left, atol=1e-9)
        assert pupillary_distance(landmarks) == pytest.approx(float(np.hypot(*(left - right))), abs=1e-9)


class TestModifyKeypoints:
    def test_zero_factor_is_landmark(self) -> None:
        lm = make_landmarks((30, 50), (70, 50), size=(128, 128))
        points = modify_keypoints(lm, KeypointSpec.model_validate([[36, 0.0, 0.0]]))
        np.testing.assert_array_equal(points, [[30.0, 50.0]])

    def test_half_pd_offset(self) -> None:
        # PD = 40, landmark 30 sits at (50, 50)
        lm = make_landmarks((30, 50), (70, 50), size=(128, 128), rest=(50, 50))
        points = modify_keypoints(lm, KeypointSpec.model_validate([[30, 1.0, 0.0]]))
        np.testing.assert_allclose(points, [[70.0, 50.0]])

    def test_clamped_to_border(self) -> None:
        lm = make_landmarks((30, 50), (70, 50), size=(128, 128), rest=(120, 5))
        points = modify_keypoints(lm, KeypointSpec.model_validate([[30, 1.0, -1.0]]))
        np.testing.assert_allclose(points, [[127.0, 0.0]])

    def test_empty_spec(self) -> None:
        lm = make_landmarks((30, 50), (70, 50), size=(128, 128))
        with pytest.raises(PriorMapError):
            modify_keypoints(lm, KeypointSpec.model_validate([]))

    def test_bad_landmark_index(self) -> None:
        with pytest.raises(ValueError):
            KeypointSpec.model_validate([[68, 0.0, 0.0]])


class TestKeypointField:
    def test_one_at_keypoint(self) -> None:
        field = keypoint_field((3.0, 4.0), 1.0, (8, 8))
        assert field[4, 3] == 1.0

    def test_value_at_distance(self) -> None:
        # pixel (0, 0) is 5 px from (3, 4)
        field = keypoint_field((3.0, 4.0), 1.0, (8, 8))
        assert field[0, 0] == pytest.approx(math.exp(-2.5), abs=1e-12)
        assert field[0, 0] == pytest.approx(0.082085, abs=1e-6)

    def test_squared_form(self) -> None:
        field = keypoint_field((3.0, 4.0), 2.0, (8, 8), exponent_form="squared")
        assert field[0, 0] == pytest.approx(math.exp(-25.0 / 8.0), abs=1e-12)

    def test_matches_scalar_evaluation(self) -> None:
        rng = np.random.default_rng(0)
        for _ in range(100):
            height, width = rng.integers(4, 12, size=2)
            point = rng.uniform(0, [width - 1, height - 1])
            sigma = rng.uniform(0.5, 5.0)
            form = "distance" if rng.random() < 0.5 else "squared"
            field = keypoint_field(point, sigma, (int(height), int(width)), exponent_form=form)
            for y in range(height):
                for x in range(width):
                    d = math.sqrt((x - point[0]) ** 2 + (y - point[1]) ** 2)
                    if form == "squared":
                        d = d * d
                    assert abs(field[y, x] - math.exp(-d / (2 * sigma * sigma))) <= 1e-12

    def test_sigma_must_be_positive(self) -> None:
        with pytest.raises(PriorMapError):
            keypoint_field((1.0, 1.0), 0.0, (4, 4))

    @pytest.mark.parametrize("form", ["distance", "squared"])
    def test_default_sigma_half_maximum(self, form: str) -> None:
        size = (100, 80)
        sigma = default_sigma(size, form)
        field = keypoint_field((0.0, 0.0), sigma, (1, 9), exponent_form=form)
        assert field[0, 8] == pytest.approx(0.5, abs=1e-12)


class TestSynthesizePrior:
    def test_single_keypoint_max_at_point(self) -> None:
        prior = synthesize_prior(np.array([[5.0, 7.0]]), 1.5, (12, 12))
        assert prior.map.max() == 1.0
        assert prior.map[7, 5] == 1.0
        assert prior.map.min() == 0.0

    def test_two_far_keypoints(self) -> None:
        points = np.array([[2.0, 2.0], [29.0, 29.0]])
        raw = raw_prior(points, 0.5, (32, 32))
        assert raw[2, 2] == pytest.approx(1.0, abs=1e-9)
        assert raw[29, 29] == pytest.approx(1.0, abs=1e-9)
        assert raw[15, 15] < 1e-6

    def test_monotone_along_ray(self) -> None:
        prior = synthesize_prior(np.array([[4.0, 4.0]]), 2.0, (16, 16))
        ray = prior.map[4, 4:]
        assert np.all(np.diff(ray) < 0)

    def test_permutation_invariant(self) -> None:
        points = np.random.default_rng(1).uniform(0, 31, size=(6, 2))
        a = synthesize_prior(points, 2.0, (32, 32)).map
        b = synthesize_prior(points[::-1].copy(), 2.0, (32, 32)).map
        np.testing.assert_array_equal(a, b)

    def test_constant_map_rejected(self) -> None:
        with pytest.raises(PriorMapError):
            synthesize_prior(np.array([[0.0, 0.0]]), 1.0, (1, 1))

    def test_no_points_rejected(self) -> None:
        with pytest.raises(PriorMapError):
            synthesize_prior(np.zeros((0, 2)), 1.0, (4, 4))

    def test_random_configurations_in_range(self) -> None:
        rng = np.random.default_rng(2)
        for _ in range(20):
            points = rng.uniform(0, 15, size=(int(rng.integers(1, 6)), 2))
            prior = synthesize_prior(points, float(rng.uniform(0.5, 4.0)), (16, 16))
            assert prior.map.min() >= 0.0
            assert prior.map.max() == 1.0

    def test_from_landmarks_rescales(self) -> None:
        lm = make_landmarks((60, 100), (140, 100), size=(256, 256))
        prior = prior_from_landmarks(lm, default_keypoint_spec(), (64, 64))
        assert prior.size == (64, 64)
        assert prior.sigma == pytest.approx(default_sigma((64, 64)))
        assert prior.source_keypoints.shape == (len(default_keypoint_spec().entries), 2)
        assert np.all(prior.source_keypoints <= 63)

    def test_from_landmarks_rejects_zero_sigma(self) -> None:
        lm = make_landmarks((60, 100), (140, 100), size=(256, 256))
        with pytest.raises(PriorMapError, match="sigma"):
            prior_from_landmarks(lm, default_keypoint_spec(), (64, 64), sigma=0.0)


class TestFuse:
    def test_appends_channel(self) -> None:
        frame = np.random.default_rng(0).uniform(size=(3, 8, 8))
        prior = synthesize_prior(np.array([[3.0, 3.0]]), 1.0, (8, 8))
        fused = fuse(frame, prior)
        assert fused.data.shape == (4, 8, 8)
        assert fused.channels == 3
        np.testing.assert_array_equal(fused.frame(), frame)
        np.testing.assert_array_equal(fused.prior(), prior.map)

    def test_zero_map(self) -> None:
        fused = fuse(np.ones((1, 4, 4)), np.zeros((4, 4)))
        np.testing.assert_array_equal(fused.prior(), np.zeros((4, 4)))

    def test_size_mismatch(self) -> None:
        with pytest.raises(ShapeMismatchError):
            fuse(np.ones((3, 8, 8)), np.zeros((8, 7)))
