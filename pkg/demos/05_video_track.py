"""Immersive video frames: rotation sweep plus a forward dolly.

Composes a panorama from one scene view, renders a small yaw sweep by
resampling the panorama, then renders translated frames by depth-splatting
the view's points (super-resolved depth keeps the splat dense) with mock
inpainting of disocclusion holes.
"""

from pathlib import Path

from panoweave.backends.mocks import MockDepthBackend, MockInpaintBackend
from panoweave.fusion import compose_panorama
from panoweave.geometry import intrinsics_from_fov, rotation_y
from panoweave.imageops import resize_float
from panoweave.synthetic import procedural_image
from panoweave.video import CameraPose, CameraTrack, render_track
from panoweave.warp import ViewRecord

out = Path(__file__).parent / "output" / "05_video_track"

SIZE = 256
K = intrinsics_from_fov(100.0, SIZE, SIZE)
image = procedural_image(9, SIZE, SIZE)
view = ViewRecord(
    image=image,
    intrinsics=K,
    rotation=rotation_y(0.0),
    sr_image=resize_float(image, 4 * SIZE, 4 * SIZE, "bicubic"),
)
pano, _ = compose_panorama([view], pano_width=2048)

# super-resolved frontal-plane depth so the forward dolly splat stays dense
depth_backend = MockDepthBackend(scene="frontal_plane", value=2.0, fov_deg=100.0)
view.depth = depth_backend.estimate_depth(view.sr_image)

poses = [CameraPose.from_yaw(yaw, width=SIZE, height=SIZE) for yaw in (-20.0, -10.0, 0.0, 10.0, 20.0)]
poses += [
    CameraPose.from_yaw(0.0, translation=(0.0, 0.0, z), width=SIZE, height=SIZE)
    for z in (0.1, 0.2, 0.3)
]
track = CameraTrack(poses=poses)
frames = render_track(
    pano, [view], track, MockInpaintBackend(), outdir=out, scene_prompt="a procedural courtyard", seed=9
)
print(f"rendered {len(frames)} frames ({len(poses) - 3} rotation, 3 translation) into {out}")
print("pose manifest:", out / "manifest.json")
