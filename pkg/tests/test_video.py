import json
import logging

import numpy as np
import pytest

from panoweave.backends import BackendError
from panoweave.backends.mocks import MockDepthBackend, MockInpaintBackend
from panoweave.fusion import compose_panorama
from panoweave.geometry import intrinsics_from_fov, rotation_y
from panoweave.imageops import bilinear_sample, psnr, resize_float
from panoweave.synthetic import procedural_image
from panoweave.video import (
    CameraPose,
    CameraTrack,
    render_rotation_frame,
    render_track,
    render_translation_frame,
    splat_views,
)
from panoweave.warp import ViewRecord

SIZE = 128
K = intrinsics_from_fov(100.0, SIZE, SIZE)


def smooth_view(seed, yaw=0.0, with_sr=True):
    img = procedural_image(seed, SIZE, SIZE, cycles=3.0)
    sr = resize_float(img, 4 * SIZE, 4 * SIZE, "bicubic") if with_sr else None
    return ViewRecord(image=img, intrinsics=K, rotation=rotation_y(yaw), sr_image=sr)


def plane_view(seed=0, depth_res="sr", d0=2.0):
    """Fronto-parallel wall at z = d0 with matching-resolution depth."""
    view = smooth_view(seed)
    res = 4 * SIZE if depth_res == "sr" else SIZE
    backend = MockDepthBackend(scene="frontal_plane", value=d0, fov_deg=100.0)
    view.depth = backend.estimate_depth(np.zeros((res, res, 3)))
    return view


class TestCameraPose:
    def test_yaw_constructor_and_rotation_only(self):
        pose = CameraPose.from_yaw(30.0)
        assert pose.is_rotation_only
        pose2 = CameraPose.from_yaw(30.0, translation=(0, 0, 0.1))
        assert not pose2.is_rotation_only

    def test_bad_rotation_rejected(self):
        with pytest.raises(ValueError):
            CameraPose(rotation=np.ones((3, 3)))

    def test_dict_round_trip_and_yaw_shorthand(self):
        pose = CameraPose.from_yaw(41.0, translation=(0.1, 0, 0), fov_deg=90.0, width=64, height=64)
        again = CameraPose.from_dict(pose.to_dict())
        np.testing.assert_allclose(again.rotation, pose.rotation)
        shorthand = CameraPose.from_dict({"yaw_deg": 41.0, "width": 64, "height": 64})
        np.testing.assert_allclose(shorthand.rotation, rotation_y(41.0).matrix)

    def test_track_file_round_trip(self, tmp_path):
        track = CameraTrack(poses=[CameraPose.from_yaw(a) for a in [0.0, 10.0]])
        track.save(tmp_path / "track.json")
        loaded = CameraTrack.load(tmp_path / "track.json")
        assert len(loaded.poses) == 2
        np.testing.assert_allclose(loaded.poses[1].rotation, rotation_y(10.0).matrix)

    def test_empty_track_rejected(self):
        with pytest.raises(ValueError):
            CameraTrack(poses=[])


class TestRotationFrames:
    def test_front_frame_matches_source_view(self):
        view = smooth_view(0)
        pano, _ = compose_panorama([view], pano_width=1024)
        pose = CameraPose.from_yaw(0.0, fov_deg=100.0, width=SIZE, height=SIZE)
        frame = render_rotation_frame(pano, pose)
        inner = slice(SIZE // 8, -SIZE // 8)
        assert psnr(frame[inner, inner], view.image[inner, inner]) > 35.0

    def test_yaw_360_equals_yaw_0_bit_identically(self):
        pano = procedural_image(1, 256, 128)
        a = render_rotation_frame(pano, CameraPose.from_yaw(0.0, width=64, height=64))
        b = render_rotation_frame(pano, CameraPose.from_yaw(360.0, width=64, height=64))
        assert np.array_equal(a, b)

    def test_constant_panorama_gives_constant_frame(self):
        pano = np.full((128, 256, 3), 0.3, np.float32)
        frame = render_rotation_frame(pano, CameraPose.from_yaw(123.4, width=64, height=64))
        np.testing.assert_allclose(frame, 0.3, atol=1e-6)

    def test_hole_free_for_any_pose(self):
        pano = procedural_image(2, 256, 128)
        frame = render_rotation_frame(pano, CameraPose.from_yaw(77.7, width=64, height=64))
        assert np.isfinite(frame).all()

    def test_pitched_camera_samples_near_poles(self):
        pano = procedural_image(4, 256, 128)
        a = np.radians(80.0)
        pitch = np.array(
            [[1.0, 0.0, 0.0], [0.0, np.cos(a), -np.sin(a)], [0.0, np.sin(a), np.cos(a)]]
        )
        pose = CameraPose(rotation=pitch, fov_deg=100.0, width=64, height=64)
        frame = render_rotation_frame(pano, pose)
        assert np.isfinite(frame).all()
        assert frame.min() >= 0.0 and frame.max() <= 1.0

    def test_translation_pose_rejected(self):
        pano = procedural_image(3, 256, 128)
        with pytest.raises(ValueError):
            render_rotation_frame(pano, CameraPose.from_yaw(0.0, translation=(0, 0, 0.5)))


class TestSplatting:
    def test_nearest_depth_wins(self):
        # two coincident views, the nearer one carrying a distinct color
        near = ViewRecord(
            image=np.full((SIZE, SIZE, 3), 0.9, np.float32),
            intrinsics=K,
            rotation=rotation_y(0.0),
            depth=np.full((SIZE, SIZE), 1.0, np.float32),
        )
        far = ViewRecord(
            image=np.full((SIZE, SIZE, 3), 0.1, np.float32),
            intrinsics=K,
            rotation=rotation_y(0.0),
            depth=np.full((SIZE, SIZE), 2.0, np.float32),
        )
        frame, holes = splat_views([far, near], CameraPose.from_yaw(0.0, width=SIZE, height=SIZE))
        assert (frame[~holes] == np.float32(0.9)).all()

    def test_zero_translation_matches_rotation_frame(self):
        view = plane_view(4, depth_res="sr")
        pano, _ = compose_panorama([view], pano_width=1024)
        pose = CameraPose.from_yaw(0.0, width=SIZE, height=SIZE)
        rot_frame = render_rotation_frame(pano, pose)
        splat_frame, holes = splat_views([view], pose)
        valid = ~holes
        assert valid.mean() > 0.95
        err = np.abs(splat_frame[valid] - rot_frame[valid]).mean()
        assert err < 2.0 / 255.0

    def test_missing_depth_rejected(self):
        with pytest.raises(ValueError):
            splat_views([smooth_view(5)], CameraPose.from_yaw(0.0))

    def test_sr_depth_source_leaves_far_fewer_holes(self):
        pose = CameraPose.from_yaw(0.0, translation=(0.0, 0.0, 0.2), width=SIZE, height=SIZE)
        _, holes_hi = splat_views([plane_view(6, depth_res="sr")], pose)
        _, holes_lo = splat_views([plane_view(6, depth_res="low")], pose)
        # compare away from the frame border, where the plane leaves the FoV
        inner = slice(SIZE // 8, -SIZE // 8)
        frac_hi = holes_hi[inner, inner].mean()
        frac_lo = holes_lo[inner, inner].mean()
        assert frac_lo > 0.05
        assert frac_lo >= 5.0 * max(frac_hi, 1e-9)
        assert frac_hi < 0.01

    def test_forward_translation_magnifies_center(self):
        d0 = 2.0
        step = d0 / 10.0
        view = plane_view(7, depth_res="sr", d0=d0)
        pose0 = CameraPose.from_yaw(0.0, width=SIZE, height=SIZE)
        pose1 = CameraPose.from_yaw(0.0, translation=(0.0, 0.0, step), width=SIZE, height=SIZE)
        static, holes0 = splat_views([view], pose0)
        moved, holes1 = splat_views([view], pose1)
        # similar triangles: content at tan offset r appears at r / (1 - 0.1)
        mag = 1.0 / (1.0 - step / d0)
        c = (SIZE - 1) / 2.0
        ys, xs = np.meshgrid(np.arange(SIZE), np.arange(SIZE), indexing="ij")
        inner = (np.abs(xs - c) < SIZE / 5) & (np.abs(ys - c) < SIZE / 5)
        src_x = c + (xs - c) / mag
        src_y = c + (ys - c) / mag
        expected = bilinear_sample(static, src_x[inner], src_y[inner])
        got = moved[inner]
        ok = ~holes1[inner]
        err = np.abs(expected[ok] - got[ok]).mean()
        assert err < 3.0 / 255.0


class TestTranslationFrame:
    def test_holes_inpainted_once(self):
        view = plane_view(8, depth_res="low")
        pose = CameraPose.from_yaw(0.0, translation=(0.0, 0.0, 0.2), width=SIZE, height=SIZE)

        class CountingInpaint(MockInpaintBackend):
            calls = 0

            def inpaint(self, image, mask, prompt, negative_prompt, seed):
                type(self).calls += 1
                assert prompt == "a quiet scene"
                return super().inpaint(image, mask, prompt, negative_prompt, seed)

        frame = render_translation_frame([view], pose, CountingInpaint(), "a quiet scene", 3)
        assert CountingInpaint.calls == 1
        assert np.isfinite(frame).all()

    def test_inpaint_failure_falls_back_with_warning(self, caplog):
        view = plane_view(9, depth_res="low")
        pose = CameraPose.from_yaw(0.0, translation=(0.0, 0.0, 0.2), width=SIZE, height=SIZE)

        class Failing:
            def inpaint(self, *a, **k):
                raise BackendError("down", retriable=True)

        with caplog.at_level(logging.WARNING):
            frame = render_translation_frame([view], pose, Failing(), "x", 0)
        assert np.isfinite(frame).all()
        assert any("falling back" in r.message for r in caplog.records)

    def test_deterministic(self):
        view = plane_view(10, depth_res="low")
        pose = CameraPose.from_yaw(5.0, translation=(0.05, 0.0, 0.1), width=SIZE, height=SIZE)
        a = render_translation_frame([view], pose, MockInpaintBackend(), "s", 1)
        b = render_translation_frame([view], pose, MockInpaintBackend(), "s", 1)
        assert np.array_equal(a, b)


class TestRenderTrack:
    def pano_and_views(self):
        view = plane_view(11, depth_res="low")
        pano, _ = compose_panorama([view], pano_width=512)
        return pano, [view]

    def test_all_rotation_track(self, tmp_path):
        pano, views = self.pano_and_views()
        track = CameraTrack(poses=[CameraPose.from_yaw(a, width=64, height=64) for a in [0, 5, 10]])
        frames = render_track(pano, views, track, outdir=tmp_path / "out")
        assert len(frames) == 3
        files = sorted(p.name for p in (tmp_path / "out").glob("frame_*.png"))
        assert files == ["frame_000001.png", "frame_000002.png", "frame_000003.png"]
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert len(manifest["frames"]) == 3
        assert manifest["frames"][0]["file"] == "frame_000001.png"

    def test_mixed_track_dispatches(self, tmp_path):
        pano, views = self.pano_and_views()
        track = CameraTrack(
            poses=[
                CameraPose.from_yaw(0.0, width=64, height=64),
                CameraPose.from_yaw(0.0, translation=(0, 0, 0.1), width=64, height=64),
            ]
        )
        frames = render_track(pano, views, track, MockInpaintBackend(), outdir=tmp_path / "out")
        assert len(frames) == 2

    def test_single_frame_track_no_outdir(self):
        pano, views = self.pano_and_views()
        track = CameraTrack(poses=[CameraPose.from_yaw(45.0, width=32, height=32)])
        frames = render_track(pano, views, track)
        assert len(frames) == 1 and frames[0].shape == (32, 32, 3)
