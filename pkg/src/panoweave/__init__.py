"""panoweave: compose 360-degree panoramas from a single perspective view.

The geometric core (spherical warping, rasterization, equirectangular
fusion) is pure numpy; all learned models (inpainting, chat, VQA,
super-resolution, depth, text-to-image) are pluggable backends with
deterministic mock implementations, so the whole pipeline runs and tests
offline.
"""

from panoweave.backends import BackendDescriptor, BackendError, Backends, build_backends
from panoweave.depth3d import (
    DepthAlignment,
    PointCloud,
    align_depths,
    apply_alignment,
    depth_to_pointcloud,
    estimate_aligned_depths,
    fuse_depth_panorama,
    patched_depth_superres,
)
from panoweave.fusion import PanoramaCanvas, boundary_weight, compose_panorama, fuse_pixels
from panoweave.geometry import (
    CameraIntrinsics,
    RotationY,
    angular_step,
    equirect_to_sphere,
    intrinsics_from_fov,
    pixel_to_sphere,
    rotation_y,
    sphere_to_equirect,
    sphere_to_pixel,
)
from panoweave.pipeline import (
    PanoramaResult,
    PipelineConfig,
    PipelineError,
    SceneDescriptions,
    ViewSchedule,
    run_pipeline,
    run_text_pipeline,
)
from panoweave.video import CameraPose, CameraTrack, render_rotation_frame, render_track, render_translation_frame
from panoweave.warp import Mesh, ViewRecord, build_mesh, rasterize, warp_view

__version__ = "0.1.0"

__all__ = [
    "BackendDescriptor",
    "BackendError",
    "Backends",
    "CameraIntrinsics",
    "CameraPose",
    "CameraTrack",
    "DepthAlignment",
    "Mesh",
    "PanoramaCanvas",
    "PanoramaResult",
    "PipelineConfig",
    "PipelineError",
    "PointCloud",
    "RotationY",
    "SceneDescriptions",
    "ViewRecord",
    "ViewSchedule",
    "align_depths",
    "angular_step",
    "apply_alignment",
    "boundary_weight",
    "build_backends",
    "build_mesh",
    "compose_panorama",
    "depth_to_pointcloud",
    "equirect_to_sphere",
    "estimate_aligned_depths",
    "fuse_depth_panorama",
    "fuse_pixels",
    "intrinsics_from_fov",
    "patched_depth_superres",
    "pixel_to_sphere",
    "rasterize",
    "render_rotation_frame",
    "render_track",
    "render_translation_frame",
    "rotation_y",
    "run_pipeline",
    "run_text_pipeline",
    "sphere_to_equirect",
    "sphere_to_pixel",
    "warp_view",
    "__version__",
]
