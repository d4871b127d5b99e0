import logging

import numpy as np
import pytest

from panoweave.backends import BackendError
from panoweave.backends.mocks import MockDepthBackend
from panoweave.depth3d import (
    DepthAlignment,
    align_depths,
    alignment_residual_rms,
    apply_alignment,
    depth_to_pointcloud,
    fuse_depth_panorama,
    patch_grid_origins,
    patched_depth_superres,
)
from panoweave.geometry import equirect_to_sphere, intrinsics_from_fov, rotation_y
from panoweave.imageops import resize_float
from panoweave.synthetic import procedural_image
from panoweave.warp import ViewRecord

SIZE = 64
K = intrinsics_from_fov(100.0, SIZE, SIZE)


def view_with_depth(depth, yaw=0.0, seed=0):
    return ViewRecord(
        image=procedural_image(seed, SIZE, SIZE),
        intrinsics=K,
        rotation=rotation_y(yaw),
        depth=np.asarray(depth, np.float32),
    )


def smooth_depth(seed=0):
    base = procedural_image(seed, SIZE, SIZE)[..., 0]
    return (1.0 + 3.0 * base).astype(np.float32)


def floor_views(yaws, h=2.0):
    backend = MockDepthBackend(scene="floor", value=h, fov_deg=100.0)
    views = []
    for i, yaw in enumerate(yaws):
        img = procedural_image(i, SIZE, SIZE)
        views.append(
            ViewRecord(image=img, intrinsics=K, rotation=rotation_y(yaw), depth=backend.estimate_depth(img))
        )
    return views


class TestAlignDepths:
    def test_affine_offset_recovered_exactly(self):
        d1 = smooth_depth(1)
        v1 = view_with_depth(d1, 0.0, seed=1)
        v2 = view_with_depth(2.0 * d1 + 0.5, 0.0, seed=2)
        alignment = align_depths([v1, v2])
        assert alignment.scales[1] == pytest.approx(0.5, abs=1e-6)
        assert alignment.shifts[1] == pytest.approx(-0.25, abs=1e-6)
        assert alignment.residual_rms < 1e-6
        assert not alignment.regularized

    def test_consistent_views_stay_identity(self):
        d = smooth_depth(3)
        views = [view_with_depth(d, 0.0, seed=i) for i in range(3)]
        alignment = align_depths(views)
        np.testing.assert_allclose(alignment.scales, 1.0, atol=1e-9)
        np.testing.assert_allclose(alignment.shifts, 0.0, atol=1e-9)

    def test_rotated_views_of_world_scene_recover_affine(self):
        # world-consistent bounded scene: sphere of radius 3 around an
        # off-center point; ray depth from the shared camera center
        from panoweave.warp import camera_ray_grid

        center = np.array([0.3, 0.4, 0.2])
        radius = 3.0

        def scene_depth(yaw):
            dirs = camera_ray_grid(K, rotation_y(yaw))
            dc = dirs @ center
            return (dc + np.sqrt(dc**2 - center @ center + radius**2)).reshape(SIZE, SIZE)

        views = []
        for i, yaw in enumerate([0.0, 41.0, -41.0]):
            views.append(
                ViewRecord(
                    image=procedural_image(i, SIZE, SIZE),
                    intrinsics=K,
                    rotation=rotation_y(yaw),
                    depth=scene_depth(yaw).astype(np.float32),
                )
            )
        views[1].depth = (3.0 * views[1].depth + 1.0).astype(np.float32)
        alignment = align_depths(views)
        assert alignment.scales[1] == pytest.approx(1.0 / 3.0, rel=5e-3)
        assert alignment.shifts[1] == pytest.approx(-1.0 / 3.0, abs=5e-3)
        assert alignment.scales[2] == pytest.approx(1.0, rel=5e-3)
        assert abs(alignment.shifts[2]) < 5e-3

    def test_constant_overlap_regularizes_with_warning(self, caplog):
        v1 = view_with_depth(np.full((SIZE, SIZE), 2.0), 0.0)
        v2 = view_with_depth(np.full((SIZE, SIZE), 2.0), 41.0)
        with caplog.at_level(logging.WARNING):
            alignment = align_depths([v1, v2])
        assert alignment.regularized
        assert any("rank deficient" in r.message for r in caplog.records)
        assert alignment.scales[1] == pytest.approx(1.0, abs=1e-6)
        assert alignment.shifts[1] == pytest.approx(0.0, abs=1e-6)

    def test_objective_non_increasing(self):
        rng = np.random.default_rng(11)
        views = floor_views([0.0, 41.0])
        views[1].depth = (views[1].depth * 1.7 + 0.3 + rng.normal(0, 0.01, (SIZE, SIZE))).astype(
            np.float32
        )
        alignment = align_depths(views)
        identity = DepthAlignment(np.ones(2), np.zeros(2), 0.0)
        assert alignment_residual_rms(views, alignment) <= alignment_residual_rms(views, identity) + 1e-12

    def test_missing_depth_rejected(self):
        with pytest.raises(ValueError):
            align_depths([ViewRecord(procedural_image(0, SIZE, SIZE), K, rotation_y(0.0))])

    def test_nonpositive_scale_rejected_by_type(self):
        with pytest.raises(ValueError):
            DepthAlignment(np.array([1.0, -0.5]), np.zeros(2), 0.0)

    def test_apply_alignment(self):
        d = smooth_depth(4)
        views = [view_with_depth(d, 0.0), view_with_depth(d, 0.0)]
        alignment = DepthAlignment(np.array([1.0, 2.0]), np.array([0.0, 0.5]), 0.0)
        out = apply_alignment(views, alignment)
        np.testing.assert_allclose(out[1].depth, 2.0 * d + 0.5, atol=1e-6)
        np.testing.assert_allclose(out[0].depth, d)


class TestFuseDepthPanorama:
    def test_constant_depth_fuses_constant(self):
        views = [view_with_depth(np.full((SIZE, SIZE), 2.0), yaw) for yaw in [0.0, 41.0, -41.0]]
        alignment = DepthAlignment(np.ones(3), np.zeros(3), 0.0)
        depth, covered = fuse_depth_panorama(views, alignment, pano_width=256)
        assert covered.any()
        np.testing.assert_allclose(depth[covered], 2.0, atol=1e-5)
        assert (depth[~covered] == 0).all()

    def test_equal_weight_overlap_averages(self):
        views = [
            view_with_depth(np.full((SIZE, SIZE), 1.0), 0.0),
            view_with_depth(np.full((SIZE, SIZE), 3.0), 0.0),
        ]
        alignment = DepthAlignment(np.ones(2), np.zeros(2), 0.0)
        depth, covered = fuse_depth_panorama(views, alignment, pano_width=256)
        np.testing.assert_allclose(depth[covered], 2.0, atol=1e-5)

    def test_floor_scene_matches_analytic_equirect_depth(self):
        views = floor_views([0.0, 41.0, -41.0, 82.0, -82.0, 123.0, 200.5])
        alignment = DepthAlignment(np.ones(7), np.zeros(7), 0.0)
        depth, covered = fuse_depth_panorama(views, alignment, pano_width=512)
        h, w = depth.shape
        vs, us = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        dirs = equirect_to_sphere(us.astype(float).ravel(), vs.astype(float).ravel(), w, h)
        analytic = (2.0 / np.maximum(np.abs(dirs[:, 1]), 1e-9)).reshape(h, w)
        lat_band = (np.abs(vs - h / 2) > h * 0.12) & (np.abs(vs - h / 2) < h * 0.24)
        region = covered & lat_band
        assert region.sum() > 1000
        rel = (depth[region] - analytic[region]) / analytic[region]
        assert np.sqrt(np.mean(rel**2)) < 0.01


class TestPointCloud:
    def test_constant_depth_gives_constant_radius(self):
        rgb = procedural_image(5, 128, 64)
        depth = np.full((64, 128), 2.0, np.float32)
        cloud = depth_to_pointcloud(rgb, depth, stride=1)
        radii = np.linalg.norm(cloud.points, axis=1)
        np.testing.assert_allclose(radii, 2.0, atol=1e-6)

    def test_center_pixel_on_forward_axis(self):
        rgb = np.zeros((64, 128, 3), np.float32)
        depth = np.full((64, 128), 3.0, np.float32)
        cloud = depth_to_pointcloud(rgb, depth, stride=1)
        dirs = equirect_to_sphere(np.array([64.0]), np.array([32.0]), 128, 64)
        idx = 32 * 128 + 64
        np.testing.assert_allclose(cloud.points[idx], 3.0 * dirs[0], atol=1e-6)

    def test_stride_bounds_count(self):
        rgb = np.zeros((64, 128, 3), np.float32)
        depth = np.full((64, 128), 1.0, np.float32)
        cloud = depth_to_pointcloud(rgb, depth, stride=4)
        assert len(cloud) <= (128 // 4) * (64 // 4)

    def test_uncovered_pixels_skipped(self):
        rgb = np.zeros((64, 128, 3), np.float32)
        depth = np.zeros((64, 128), np.float32)
        depth[30:34, 60:68] = 2.0
        cloud = depth_to_pointcloud(rgb, depth, stride=1)
        assert len(cloud) == 4 * 8

    def test_write_ply(self, tmp_path):
        from panoweave.fileio import read_ply

        rgb = procedural_image(6, 32, 16)
        depth = np.full((16, 32), 2.0, np.float32)
        cloud = depth_to_pointcloud(rgb, depth, stride=2)
        cloud.write(tmp_path / "c.ply")
        pts, _ = read_ply(tmp_path / "c.ply")
        assert len(pts) == len(cloud)


class TestPatchedDepthSuperres:
    def test_grid_origins(self):
        assert patch_grid_origins(2048, 512) == [0, 128, 256, 384, 512, 640, 768, 896,
                                                 1024, 1152, 1280, 1408, 1536]
        assert patch_grid_origins(256, 64) == [i * 16 for i in range(13)]

    def test_grid_must_tile(self):
        with pytest.raises(ValueError):
            patch_grid_origins(2049, 512)

    def test_idempotent_for_upsampled_backend(self):
        low = smooth_depth(7)
        sr_img = resize_float(procedural_image(7, SIZE, SIZE), 4 * SIZE, 4 * SIZE)
        upsampled = resize_float(low, 4 * SIZE, 4 * SIZE, "bicubic")

        class Upsampled:
            def __init__(self):
                self.origins = iter(
                    (oy, ox)
                    for oy in patch_grid_origins(4 * SIZE, SIZE)
                    for ox in patch_grid_origins(4 * SIZE, SIZE)
                )

            def estimate_depth(self, image):
                oy, ox = next(self.origins)
                return upsampled[oy : oy + SIZE, ox : ox + SIZE]

        out = patched_depth_superres(sr_img, low, Upsampled())
        np.testing.assert_allclose(out, upsampled, atol=1e-9)

    def test_constant_backend_aligns_to_low_depth(self):
        low = np.full((SIZE, SIZE), 2.0, np.float32)
        sr_img = np.zeros((4 * SIZE, 4 * SIZE, 3), np.float32)
        out = patched_depth_superres(sr_img, low, MockDepthBackend(scene="constant", value=7.0))
        np.testing.assert_allclose(out, 2.0, atol=1e-6)

    def test_triple_scale_recovered_per_patch(self):
        low = smooth_depth(8)
        sr_img = np.zeros((4 * SIZE, 4 * SIZE, 3), np.float32)
        upsampled = resize_float(low, 4 * SIZE, 4 * SIZE, "bicubic")

        class Tripled:
            def __init__(self):
                self.origins = iter(
                    (oy, ox)
                    for oy in patch_grid_origins(4 * SIZE, SIZE)
                    for ox in patch_grid_origins(4 * SIZE, SIZE)
                )

            def estimate_depth(self, image):
                oy, ox = next(self.origins)
                return 3.0 * upsampled[oy : oy + SIZE, ox : ox + SIZE]

        out = patched_depth_superres(sr_img, low, Tripled())
        np.testing.assert_allclose(out, upsampled, atol=1e-6)

    def test_backend_failure_falls_back_to_upsampled(self, caplog):
        low = smooth_depth(9)
        sr_img = np.zeros((4 * SIZE, 4 * SIZE, 3), np.float32)
        upsampled = resize_float(low, 4 * SIZE, 4 * SIZE, "bicubic")

        class AlwaysFails:
            def estimate_depth(self, image):
                raise BackendError("offline", retriable=True)

        with caplog.at_level(logging.WARNING):
            out = patched_depth_superres(sr_img, low, AlwaysFails())
        np.testing.assert_allclose(out, upsampled, atol=1e-9)
        assert any("falls" in r.message or "using upsampled" in r.message for r in caplog.records)
