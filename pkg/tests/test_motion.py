"""Tests for keypoint detection, sparse affine composition and dense motion."""

from __future__ import annotations

import numpy as np
import pytest

from fpmm.engine import functional as F
from fpmm.engine.autograd import check_gradients
from fpmm.engine.tensor import Tensor
from fpmm.motion.dense import DenseMotion, DenseMotionNetwork, combine, predict_dense
from fpmm.motion.keypoints import (
    KeypointDetector,
    KeypointSet,
    detect_keypoints,
    gaussian_heatmaps,
    inverse_2x2,
    transfer_keypoints,
)
from fpmm.motion.sparse import compose_sparse, exact_affine_flow, keypoints_for_affine, pixel_to_normalized_affine
from fpmm.prior.prior_map import fuse
from fpmm.shared.errors import ShapeMismatchError, SingularJacobianError


def _random_keypoints(rng: np.random.Generator, k: int = 4) -> KeypointSet:
    positions = rng.uniform(-0.8, 0.8, size=(k, 2))
    jacobians = np.eye(2) + rng.normal(0.0, 0.2, size=(k, 2, 2))
    return KeypointSet.from_arrays(positions, jacobians)


def _smooth_frame(size: tuple[int, int], channels: int = 1) -> np.ndarray:
    grid = F.pixel_grid(*size)
    image = 0.5 + 0.2 * np.sin(grid[..., 0] / 3.0) * np.cos(grid[..., 1] / 4.0)
    return np.repeat(image[None], channels, axis=0)


def _detector(rng: np.random.Generator, channels: int = 1, k: int = 3) -> KeypointDetector:
    return KeypointDetector(channels + 1, k, rng, block_expansion=4, num_blocks=2, max_features=8, downsample=2)


class TestKeypointSet:
    def test_shape_check(self) -> None:
        with pytest.raises(ShapeMismatchError):
            KeypointSet(Tensor(np.zeros((3, 2))), Tensor(np.zeros((2, 2, 2))))

    def test_default_identity_jacobians(self) -> None:
        kp = KeypointSet.from_arrays([[0.0, 0.5], [0.1, -0.2]])
        np.testing.assert_array_equal(kp.jacobians.data, np.stack([np.eye(2)] * 2))

    def test_pixel_positions(self) -> None:
        kp = KeypointSet.from_arrays([[-1.0, 1.0]])
        np.testing.assert_allclose(kp.pixel_positions((9, 5)), [[0.0, 8.0]])

    def test_inverse_2x2(self) -> None:
        mats = np.random.default_rng(0).normal(size=(5, 2, 2)) + 2 * np.eye(2)
        np.testing.assert_allclose(inverse_2x2(Tensor(mats)).data, np.linalg.inv(mats), atol=1e-12)


class TestDetector:
    def test_untrained_jacobians_are_identity(self) -> None:
        rng = np.random.default_rng(0)
        detector = _detector(rng)
        fused = fuse(_smooth_frame((16, 16)), np.random.default_rng(1).uniform(size=(16, 16)))
        kp = detect_keypoints(fused, detector)
        assert kp.num_keypoints == 3
        np.testing.assert_array_equal(kp.jacobians.data, np.stack([np.eye(2)] * 3))

    def test_positions_normalized(self) -> None:
        detector = _detector(np.random.default_rng(2))
        kp = detector(fuse(_smooth_frame((16, 16)), np.zeros((16, 16))))
        assert np.all(np.abs(kp.positions.data) <= 1.0 + 1e-12)

    def test_deterministic(self) -> None:
        detector = _detector(np.random.default_rng(3))
        fused = fuse(_smooth_frame((16, 16)), np.ones((16, 16)))
        a, b = detector(fused), detector(fused)
        np.testing.assert_array_equal(a.positions.data, b.positions.data)
        np.testing.assert_array_equal(a.jacobians.data, b.jacobians.data)

    def test_channel_mismatch(self) -> None:
        detector = _detector(np.random.default_rng(0))
        with pytest.raises(ShapeMismatchError):
            detector(np.zeros((3, 16, 16)))

    def test_gradients(self) -> None:
        rng = np.random.default_rng(4)
        detector = _detector(rng, k=2)
        detector.jacobian_head.weight.data = rng.normal(0.0, 0.1, size=detector.jacobian_head.weight.shape)
        fused = fuse(_smooth_frame((16, 16)), rng.uniform(size=(16, 16)))

        def loss() -> Tensor:
            kp = detector(fused)
            return (kp.positions**2).sum() + (kp.jacobians**2).sum()

        assert check_gradients(loss, detector.parameters(), max_entries=4) < 1e-4


class TestTransferKeypoints:
    def test_driving_equals_onset_returns_target(self) -> None:
        rng = np.random.default_rng(0)
        onset, target = _random_keypoints(rng), _random_keypoints(rng)
        out = transfer_keypoints(onset, onset, target)
        np.testing.assert_allclose(out.positions.data, target.positions.data, atol=1e-12)
        np.testing.assert_allclose(out.jacobians.data, target.jacobians.data, atol=1e-12)

    def test_relative_displacement(self) -> None:
        onset = KeypointSet.from_arrays([[0.0, 0.0]])
        driving = KeypointSet.from_arrays([[0.1, -0.2]], [[[2.0, 0.0], [0.0, 1.0]]])
        target = KeypointSet.from_arrays([[0.5, 0.5]])
        out = transfer_keypoints(driving, onset, target)
        np.testing.assert_allclose(out.positions.data, [[0.6, 0.3]], atol=1e-12)
        np.testing.assert_allclose(out.jacobians.data, [[[2.0, 0.0], [0.0, 1.0]]], atol=1e-12)


class TestComposeSparse:
    def test_same_keypoints_identity(self) -> None:
        kp = _random_keypoints(np.random.default_rng(0))
        sparse = compose_sparse(kp, kp)
        points = np.random.default_rng(1).uniform(-1, 1, size=(10, 2))
        mapped = sparse.apply(points).data
        for k in range(kp.num_keypoints):
            np.testing.assert_allclose(mapped[k], points, atol=1e-9)

    def test_pure_translation(self) -> None:
        jac = [[[1.2, 0.1], [-0.3, 0.9]]]
        driving = KeypointSet.from_arrays([[0.1, 0.2]], jac)
        target = KeypointSet.from_arrays([[0.4, -0.1]], jac)
        points = np.array([[0.0, 0.0], [0.5, -0.5]])
        np.testing.assert_allclose(compose_sparse(target, driving).apply(points).data[0], points + [0.3, -0.3], atol=1e-12)

    def test_scale(self) -> None:
        driving = KeypointSet.from_arrays([[0.0, 0.0]])
        target = KeypointSet.from_arrays([[0.0, 0.0]], [2 * np.eye(2)])
        points = np.array([[0.3, -0.4], [1.0, 1.0]])
        np.testing.assert_allclose(compose_sparse(target, driving).apply(points).data[0], 2 * points, atol=1e-12)

    def test_matches_direct_affine(self) -> None:
        rng = np.random.default_rng(2)
        target, driving = _random_keypoints(rng), _random_keypoints(rng)
        points = rng.uniform(-1, 1, size=(7, 2))
        mapped = compose_sparse(target, driving).apply(points).data
        for k in range(4):
            jt, js = target.jacobians.data[k], driving.jacobians.data[k]
            pt, ps = target.positions.data[k], driving.positions.data[k]
            direct = pt + (points - ps) @ (jt @ np.linalg.inv(js)).T
            np.testing.assert_allclose(mapped[k], direct, atol=1e-9)

    def test_singular_jacobian_names_keypoint(self) -> None:
        target = KeypointSet.from_arrays(np.zeros((3, 2)))
        jac = np.stack([np.eye(2), np.eye(2), [[1.0, 2.0], [0.5, 1.0]]])
        driving = KeypointSet.from_arrays(np.zeros((3, 2)), jac)
        with pytest.raises(SingularJacobianError) as excinfo:
            compose_sparse(target, driving)
        assert excinfo.value.keypoint == 2

    def test_count_mismatch(self) -> None:
        with pytest.raises(ShapeMismatchError):
            compose_sparse(KeypointSet.from_arrays(np.zeros((2, 2))), KeypointSet.from_arrays(np.zeros((3, 2))))

    def test_flows_match_exact_affine(self) -> None:
        size = (12, 10)
        affine = np.array([[0.95, 0.05, 0.4], [-0.03, 1.02, -0.7]])
        target_kp, driving_kp = keypoints_for_affine(affine, np.array([[3.0, 4.0], [6.0, 8.0]]), size)
        flows = compose_sparse(target_kp, driving_kp).flows(size).data
        expected = exact_affine_flow(affine, size)
        for k in range(2):
            np.testing.assert_allclose(flows[k], expected, atol=1e-9)


class TestExactAffineFlow:
    def test_identity(self) -> None:
        np.testing.assert_array_equal(exact_affine_flow(np.eye(2, 3), (5, 6)), np.zeros((5, 6, 2)))

    def test_translation(self) -> None:
        flow = exact_affine_flow(np.array([[1.0, 0.0, 2.0], [0.0, 1.0, 0.0]]), (4, 4))
        np.testing.assert_allclose(flow[..., 0], 2.0)
        np.testing.assert_allclose(flow[..., 1], 0.0)

    def test_rotation_about_center(self) -> None:
        # 90° about (2, 2): (x, y) -> (4 - y, x)
        affine = np.array([[0.0, -1.0, 4.0], [1.0, 0.0, 0.0]])
        flow = exact_affine_flow(affine, (5, 5))
        for x, y in [(0, 0), (4, 0), (4, 4), (0, 4)]:
            np.testing.assert_allclose([x, y] + flow[y, x], [4 - y, x])

    def test_warp_matches_transformed_image(self) -> None:
        size = (16, 16)
        affine = np.array([[1.0, 0.0, 0.5], [0.0, 1.0, -0.25]])
        frame = _smooth_frame(size)
        warped = F.warp(Tensor(frame), exact_affine_flow(affine, size)).data[0]
        grid = F.pixel_grid(*size)
        expected = 0.5 + 0.2 * np.sin((grid[..., 0] + 0.5) / 3.0) * np.cos((grid[..., 1] - 0.25) / 4.0)
        # bilinear interpolation error of a smooth field, interior only
        np.testing.assert_allclose(warped[2:-2, 2:-2], expected[2:-2, 2:-2], atol=5e-3)

    def test_warp_of_linear_image_is_exact(self) -> None:
        size = (16, 16)
        affine = np.array([[1.05, 0.1, -0.4], [-0.08, 0.95, 0.6]])
        grid = F.pixel_grid(*size)
        frame = (0.2 + 0.03 * grid[..., 0] + 0.02 * grid[..., 1])[None]
        warped = F.warp(Tensor(frame), exact_affine_flow(affine, size)).data[0]
        mapped = grid @ affine[:, :2].T + affine[:, 2]
        expected = 0.2 + 0.03 * mapped[..., 0] + 0.02 * mapped[..., 1]
        # every interior pixel samples strictly inside the frame
        np.testing.assert_allclose(warped[3:13, 3:13], expected[3:13, 3:13], atol=1e-6)

    def test_normalized_affine_roundtrip(self) -> None:
        size = (9, 13)
        affine = np.array([[1.1, 0.2, -1.0], [0.1, 0.9, 2.0]])
        normalized = pixel_to_normalized_affine(affine, size)
        points = np.array([[0.0, 0.0], [12.0, 8.0], [5.0, 3.0]])
        moved = points @ affine[:, :2].T + affine[:, 2]
        mapped = F.pixels_to_normalized(points, size) @ normalized[:, :2].T + normalized[:, 2]
        np.testing.assert_allclose(F.normalized_to_pixels(mapped, size), moved, atol=1e-12)


class TestDenseMotion:
    def _network(self, rng: np.random.Generator, k: int = 2) -> DenseMotionNetwork:
        return DenseMotionNetwork(1, k, rng, block_expansion=4, num_blocks=2, max_features=8, downsample=2)

    def test_identity_motion_gives_zero_flow(self) -> None:
        rng = np.random.default_rng(0)
        kp = _random_keypoints(rng, k=2)
        motion = predict_dense(_smooth_frame((16, 16)), compose_sparse(kp, kp), self._network(rng))
        assert motion.size == (8, 8)
        np.testing.assert_allclose(motion.flow.data, 0.0, atol=1e-9)
        np.testing.assert_allclose(motion.occlusion.data, 0.5)

    def test_zero_init_attention_is_uniform(self) -> None:
        rng = np.random.default_rng(1)
        motion = self._network(rng)(_smooth_frame((16, 16)), compose_sparse(_random_keypoints(rng, 2), _random_keypoints(rng, 2)))
        np.testing.assert_allclose(motion.attention.data, 1.0 / 3.0)

    def test_ranges_with_random_heads(self) -> None:
        rng = np.random.default_rng(2)
        net = self._network(rng)
        net.attention_head.weight.data = rng.normal(0.0, 0.5, size=net.attention_head.weight.shape)
        net.occlusion_head.weight.data = rng.normal(0.0, 0.5, size=net.occlusion_head.weight.shape)
        motion = net(_smooth_frame((16, 16)), compose_sparse(_random_keypoints(rng, 2), _random_keypoints(rng, 2)))
        assert np.all((motion.occlusion.data >= 0) & (motion.occlusion.data <= 1))
        assert np.all(motion.attention.data >= 0)
        np.testing.assert_allclose(motion.attention.data.sum(axis=0), 1.0, atol=1e-12)

    def test_combine_with_oracle_keypoints(self) -> None:
        size = (8, 8)
        affine = np.array([[1.0, 0.0, 0.75], [0.0, 1.0, -0.5]])
        target_kp, driving_kp = keypoints_for_affine(affine, np.array([[2.0, 2.0], [5.0, 6.0]]), size)
        flows = compose_sparse(target_kp, driving_kp).flows(size)
        attention = np.zeros((3, 8, 8))
        attention[1], attention[2] = 0.4, 0.6
        combined = combine(flows, Tensor(attention)).data
        np.testing.assert_allclose(combined, exact_affine_flow(affine, size), atol=1e-3)

    def test_resized_scales_vectors(self) -> None:
        flow = np.ones((5, 5, 2))
        motion = DenseMotion(Tensor(flow), Tensor(np.full((5, 5), 0.5)), Tensor(np.full((2, 5, 5), 0.5)))
        small = motion.resized((3, 3))
        assert small.size == (3, 3)
        np.testing.assert_allclose(small.flow.data, 0.5)
        np.testing.assert_allclose(small.occlusion.data, 0.5)

    def test_keypoint_count_mismatch(self) -> None:
        rng = np.random.default_rng(3)
        kp = _random_keypoints(rng, k=3)
        with pytest.raises(ShapeMismatchError):
            self._network(rng)(_smooth_frame((16, 16)), compose_sparse(kp, kp))

    def test_heatmaps_peak_at_positions(self) -> None:
        heat = gaussian_heatmaps(Tensor(np.array([[-1.0, -1.0], [1.0, 1.0]])), (5, 5), 0.01).data
        assert heat[0, 0, 0] == 1.0
        assert heat[1, 4, 4] == 1.0
