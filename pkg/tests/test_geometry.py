"""Camera model and homography warping tests, including render-free oracles."""

import numpy as np
import pytest

from voxtempo.geometry import (
    CameraFrame,
    DepthHypotheses,
    backproject,
    build_warp_grid,
    project,
    warp_feature,
    warp_pixel,
)


def default_K(fx=100.0, fy=110.0, cx=32.0, cy=24.0):
    return np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])


def rot_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


class TestCameraFrame:
    def test_rejects_non_orthonormal_rotation(self):
        R = np.eye(3)
        R[0, 1] = 1e-3
        with pytest.raises(ValueError):
            CameraFrame(default_K(), R, np.zeros(3), 64, 48)

    def test_rejects_reflection(self):
        R = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ValueError):
            CameraFrame(default_K(), R, np.zeros(3), 64, 48)

    def test_rejects_lower_triangular_K(self):
        K = default_K()
        K[1, 0] = 2.0
        with pytest.raises(ValueError):
            CameraFrame(K, np.eye(3), np.zeros(3), 64, 48)

    def test_camera_center_round_trip(self):
        R = rot_y(0.3)
        t = np.array([0.5, -0.2, 1.0])
        frame = CameraFrame(default_K(), R, t, 64, 48)
        center = frame.camera_center()
        np.testing.assert_allclose(R @ center + t, 0.0, atol=1e-12)


class TestDepthHypotheses:
    def test_rejects_descending(self):
        with pytest.raises(ValueError):
            DepthHypotheses(np.array([2.0, 1.0]))

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            DepthHypotheses(np.array([0.0, 1.0]))

    def test_inverse_depth_spacing(self):
        hyp = DepthHypotheses.inverse_depth(2.0, 20.0, 10)
        assert hyp.count == 10
        np.testing.assert_allclose(hyp.values[0], 2.0)
        np.testing.assert_allclose(hyp.values[-1], 20.0)
        inv = 1.0 / hyp.values
        np.testing.assert_allclose(np.diff(inv), np.diff(inv)[0], atol=1e-12)

    def test_uniform_spacing(self):
        hyp = DepthHypotheses.uniform(1.0, 5.0, 5)
        np.testing.assert_allclose(hyp.values, [1, 2, 3, 4, 5])


class TestBackproject:
    def test_principal_point_hits_optical_axis(self):
        K = default_K()
        X = backproject(np.array([32.0, 24.0, 1.0]), 3.0, K)
        np.testing.assert_allclose(X, [0.0, 0.0, 3.0], atol=1e-12)

    def test_unit_offset(self):
        K = default_K(fx=100.0, cx=32.0)
        X = backproject(np.array([132.0, 24.0, 1.0]), 1.0, K)
        np.testing.assert_allclose(X, [1.0, 0.0, 1.0], atol=1e-12)

    def test_project_round_trip(self):
        g = np.random.default_rng(0)
        K = default_K()
        for _ in range(50):
            p = np.array([g.uniform(0, 64), g.uniform(0, 48), 1.0])
            d = g.uniform(0.5, 30.0)
            pix, depth = project(backproject(p, d, K), K)
            np.testing.assert_allclose(pix, p[:2], atol=1e-9)
            np.testing.assert_allclose(depth, d, atol=1e-9)

    def test_singular_K_raises(self):
        K = default_K()
        K[0, 0] = 0.0
        with pytest.raises(ValueError):
            backproject(np.array([1.0, 1.0, 1.0]), 1.0, K)


class TestWarpPixel:
    def test_identity_pose_fixes_every_pixel(self):
        K = default_K()
        g = np.random.default_rng(1)
        for _ in range(20):
            p = np.array([g.uniform(0, 64), g.uniform(0, 48), 1.0])
            for d in (0.5, 2.0, 17.0):
                pix, depth, ok = warp_pixel(p, d, K, K, np.eye(3), np.zeros(3))
                assert ok
                np.testing.assert_allclose(pix, p[:2], atol=1e-9)
                np.testing.assert_allclose(depth, d, atol=1e-12)

    def test_axial_translation(self):
        K = default_K()
        p = np.array([32.0, 24.0, 1.0])  # principal point
        pix, depth, ok = warp_pixel(p, 5.0, K, K, np.eye(3), np.array([0.0, 0.0, -1.0]))
        assert ok
        np.testing.assert_allclose(pix, [32.0, 24.0], atol=1e-12)
        np.testing.assert_allclose(depth, 4.0)

    def test_behind_camera_flagged_invalid(self):
        K = default_K()
        p = np.array([32.0, 24.0, 1.0])
        _, depth, ok = warp_pixel(p, 1.0, K, K, np.eye(3), np.array([0.0, 0.0, -2.0]))
        assert not ok
        assert depth <= 1e-6

    def test_two_view_rig_lands_on_true_projection(self):
        """Render-and-project oracle: a known 3D point, two cameras."""
        g = np.random.default_rng(2)
        K0 = default_K()
        K1 = default_K(fx=95.0, fy=105.0, cx=30.0, cy=26.0)
        R = rot_y(0.1)
        t = np.array([0.4, 0.05, -0.3])
        for _ in range(50):
            X = np.array([g.uniform(-2, 2), g.uniform(-1.5, 1.5), g.uniform(3, 15)])
            p0, d0 = project(X, K0)
            p1_true, _ = project(R @ X + t, K1)
            pix, _, ok = warp_pixel(np.array([*p0, 1.0]), d0, K0, K1, R, t)
            assert ok
            np.testing.assert_allclose(pix, p1_true, atol=1e-6)

    def test_projective_scale_invariance(self):
        K = default_K()
        R = rot_y(-0.05)
        t = np.array([0.2, 0.0, 0.1])
        p = np.array([10.0, 40.0, 1.0])
        pix1, _, _ = warp_pixel(p, 4.0, K, K, R, t)
        pix2, _, _ = warp_pixel(3.7 * p, 4.0, K, K, R, t)
        np.testing.assert_allclose(pix1, pix2, atol=1e-9)


class TestBuildWarpGrid:
    def test_identity_pose_gives_pixel_centers(self):
        K = default_K()
        cur = CameraFrame.identity(K, 64, 48)
        his = CameraFrame.identity(K, 64, 48)
        hyp = DepthHypotheses.inverse_depth(1.0, 10.0, 4)
        grid, mask = build_warp_grid(cur, his, hyp, 12, 16)
        assert mask.all()
        vv, uu = np.meshgrid(np.arange(12), np.arange(16), indexing="ij")
        for j in range(4):
            np.testing.assert_allclose(grid[j, :, :, 0], vv, atol=1e-9)
            np.testing.assert_allclose(grid[j, :, :, 1], uu, atol=1e-9)

    def test_faraway_pose_mostly_invalid(self):
        K = default_K()
        cur = CameraFrame.identity(K, 64, 48)
        his = CameraFrame(K, np.eye(3), np.array([500.0, 0.0, 0.0]), 64, 48)
        hyp = DepthHypotheses.uniform(1.0, 10.0, 4)
        _, mask = build_warp_grid(cur, his, hyp, 12, 16)
        assert mask.mean() < 0.05

    def test_matches_scalar_warp_loop(self):
        K = default_K()
        cur = CameraFrame.identity(K, 64, 48)
        his = CameraFrame(
            default_K(fx=98.0), rot_y(0.07), np.array([0.5, -0.1, 0.2]), 64, 48
        )
        hyp = DepthHypotheses.uniform(2.0, 8.0, 3)
        feat_h, feat_w = 6, 8
        grid, mask = build_warp_grid(cur, his, hyp, feat_h, feat_w)
        sx, sy = 64 / feat_w, 48 / feat_h
        for j, d in enumerate(hyp.values):
            for v in range(feat_h):
                for u in range(feat_w):
                    p = np.array([(u + 0.5) * sx, (v + 0.5) * sy, 1.0])
                    pix, depth, ok = warp_pixel(p, d, cur.K, his.K, his.R, his.t)
                    if not ok:
                        assert not mask[j, v, u]
                        continue
                    row = pix[1] / sy - 0.5
                    col = pix[0] / sx - 0.5
                    inside = 0 <= row <= feat_h - 1 and 0 <= col <= feat_w - 1
                    assert mask[j, v, u] == inside
                    if inside:
                        assert grid[j, v, u, 0] == row
                        assert grid[j, v, u, 1] == col

    def test_round_trip_warp_returns_start(self):
        """current->A composed with A->current at the same depth is identity."""
        K = default_K()
        RA = rot_y(0.12)
        tA = np.array([0.3, -0.1, 0.4])
        g = np.random.default_rng(3)
        for _ in range(20):
            p = np.array([g.uniform(5, 59), g.uniform(5, 43), 1.0])
            d = g.uniform(2.0, 12.0)
            pix_a, depth_a, ok = warp_pixel(p, d, K, K, RA, tA)
            assert ok
            back, _, ok2 = warp_pixel(np.array([*pix_a, 1.0]), depth_a, K, K, RA.T, -RA.T @ tA)
            assert ok2
            np.testing.assert_allclose(back, p[:2], atol=1e-6)

    def test_mask_monotone_in_depth_for_forward_motion(self):
        """Pure +z translation: once outside the source frustum, stay outside."""
        K = default_K()
        cur = CameraFrame.identity(K, 64, 48)
        his = CameraFrame(K, np.eye(3), np.array([0.0, 0.0, 4.0]), 64, 48)
        hyp = DepthHypotheses.uniform(0.5, 20.0, 24)
        _, mask = build_warp_grid(cur, his, hyp, 12, 16)
        flat = mask.reshape(24, -1)
        for pix in range(flat.shape[1]):
            col = flat[:, pix].astype(int)
            # ascending depth: invalid (behind/outside) then valid; never back
            assert (np.diff(col) >= 0).all() or (np.diff(col) <= 0).all()

    def test_indivisible_feature_size_raises(self):
        K = default_K()
        cur = CameraFrame.identity(K, 64, 48)
        with pytest.raises(ValueError):
            build_warp_grid(cur, cur, DepthHypotheses(np.array([1.0])), 13, 16)


class TestWarpFeature:
    def test_identity_grid_replicates_source(self):
        K = default_K()
        cur = CameraFrame.identity(K, 64, 48)
        hyp = DepthHypotheses.uniform(1.0, 4.0, 4)
        grid, mask = build_warp_grid(cur, cur, hyp, 12, 16)
        f = np.random.default_rng(4).normal(size=(3, 12, 16))
        vol = warp_feature(f, grid, mask)
        assert vol.shape == (3, 4, 12, 16)
        for j in range(4):
            np.testing.assert_allclose(vol[:, j], f, atol=1e-12)

    def test_all_invalid_mask_zeroes_volume(self):
        grid = np.zeros((2, 4, 4, 2))
        mask = np.zeros((2, 4, 4), dtype=bool)
        vol = warp_feature(np.ones((2, 4, 4)), grid, mask)
        np.testing.assert_array_equal(vol, 0.0)

    def test_wrong_feature_shape_raises(self):
        grid = np.zeros((2, 4, 4, 2))
        mask = np.ones((2, 4, 4), dtype=bool)
        with pytest.raises(ValueError):
            warp_feature(np.ones((2, 5, 4)), grid, mask)
