"""Depth alignment, panoramic depth fusion, and point-cloud export.

Renders seven views of a floor-and-ceiling scene, estimates mock depth per
view, aligns the (deliberately mis-scaled) depths with joint least squares,
fuses them on the equirectangular grid, and writes a binary PLY cloud.
"""

from pathlib import Path

import numpy as np

from panoweave.backends.mocks import MockDepthBackend
from panoweave.depth3d import align_depths, apply_alignment, depth_to_pointcloud, fuse_depth_panorama
from panoweave.fusion import compose_panorama
from panoweave.geometry import intrinsics_from_fov, rotation_y
from panoweave.synthetic import procedural_image
from panoweave.warp import ViewRecord

out = Path(__file__).parent / "output" / "04_depth_pointcloud"
out.mkdir(parents=True, exist_ok=True)

SIZE = 256
K = intrinsics_from_fov(100.0, SIZE, SIZE)
backend = MockDepthBackend(scene="floor", value=2.0, fov_deg=100.0, max_depth=30.0)

views = []
for i, yaw in enumerate([0.0, 41.0, -41.0, 82.0, -82.0, 123.0, 200.5]):
    image = procedural_image(20 + i, SIZE, SIZE)
    depth = backend.estimate_depth(image)
    if i == 3:  # simulate a mis-calibrated monocular estimate on one view
        depth = 1.8 * depth + 0.4
    views.append(ViewRecord(image=image, intrinsics=K, rotation=rotation_y(yaw), depth=depth))

alignment = align_depths(views)
print("recovered per-view scale/shift (anchor first):")
for i, (s, t) in enumerate(zip(alignment.scales, alignment.shifts)):
    print(f"  view {i + 1}: scale {s:7.4f}  shift {t:+8.4f}")
print(f"pairwise residual RMS after alignment: {alignment.residual_rms:.4f}")

aligned = apply_alignment(views, alignment)
depth_pano, covered = fuse_depth_panorama(aligned, pano_width=1024)
rgb_pano, _ = compose_panorama(views, pano_width=1024)

cloud = depth_to_pointcloud(rgb_pano, depth_pano, stride=2, covered=covered)
cloud.write(out / "scene.ply")
radii = np.linalg.norm(cloud.points, axis=1)
print(f"{len(cloud)} points, radius range {radii.min():.2f} .. {radii.max():.2f} scene units")
print(f"point cloud written to {out / 'scene.ply'}")
