"""Mesh construction and rotation-only view warping with validity masks.

A completed view becomes a spherical mesh: one vertex per pixel center
(projected to the unit sphere and rotated into the world frame), two
triangles per pixel quad. Rendering a target view asks, per target pixel,
whether its ray hits the mesh and interpolates color and fusion weight at
the hit. Because the mesh is a regular grid and the warp is a pure
rotation, the ray cast reduces to projecting the ray into the source
camera: a hit is exactly an in-bounds projection, and the hit triangle is
the one whose half of the containing pixel quad holds the projected point.
Faces never occlude each other (all vertices lie on the unit sphere), so
no depth buffer is needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from panoweave.fusion import boundary_weight
from panoweave.geometry import CameraIntrinsics, RotationY, pixel_to_sphere

# Target-frame z below which source geometry is considered behind the camera.
FACE_CULL_EPS = 1e-4
# Slack for the in-grid hull test, in source pixels; keeps rays that graze
# the mesh boundary (e.g. identity warps) counted as hits despite rounding.
EDGE_TOL = 1e-6


@dataclass
class ViewRecord:
    """A completed perspective view and the data needed to re-render it."""

    image: np.ndarray
    intrinsics: CameraIntrinsics
    rotation: RotationY
    sr_image: Optional[np.ndarray] = None
    depth: Optional[np.ndarray] = None

    def __post_init__(self):
        h, w = self.image.shape[:2]
        if (w, h) != (self.intrinsics.width, self.intrinsics.height):
            raise ValueError(
                f"image {w}x{h} does not match intrinsics "
                f"{self.intrinsics.width}x{self.intrinsics.height}"
            )
        if self.sr_image is not None:
            sh, sw = self.sr_image.shape[:2]
            if (sw, sh) != (4 * w, 4 * h):
                raise ValueError(f"sr_image must be 4x the view resolution, got {sw}x{sh}")

    @property
    def sr_intrinsics(self) -> CameraIntrinsics:
        return self.intrinsics.scaled(4)

    def best_texture(self):
        """(texture, intrinsics) preferring the super-resolved copy."""
        if self.sr_image is not None:
            return self.sr_image, self.sr_intrinsics
        return self.image, self.intrinsics


@dataclass
class Mesh:
    """Spherical grid mesh of one source view.

    ``colors`` may carry any channel count; depth fusion reuses the same
    machinery with a single channel.
    """

    colors: np.ndarray
    intrinsics: CameraIntrinsics
    rotation: RotationY

    @property
    def height(self) -> int:
        return self.colors.shape[0]

    @property
    def width(self) -> int:
        return self.colors.shape[1]

    def vertex_directions(self) -> np.ndarray:
        """(H*W, 3) world-frame unit directions, one per source pixel center."""
        xs, ys = np.meshgrid(
            np.arange(self.width, dtype=np.float64),
            np.arange(self.height, dtype=np.float64),
        )
        pix = np.column_stack([xs.ravel(), ys.ravel(), np.ones(xs.size)])
        return pixel_to_sphere(pix, self.intrinsics) @ self.rotation.matrix.T

    def faces(self) -> np.ndarray:
        """(2*(H-1)*(W-1), 3) vertex indices; each quad splits on its v10-v01 diagonal."""
        w = self.width
        ys, xs = np.meshgrid(
            np.arange(self.height - 1), np.arange(self.width - 1), indexing="ij"
        )
        i00 = (ys * w + xs).ravel()
        a = np.column_stack([i00, i00 + 1, i00 + w])
        b = np.column_stack([i00 + 1, i00 + w + 1, i00 + w])
        return np.concatenate([a, b], axis=0).astype(np.int64)

    def vertex_colors(self) -> np.ndarray:
        return self.colors.reshape(-1, self.colors.shape[-1])

    def vertex_weights(self) -> np.ndarray:
        xs, ys = np.meshgrid(
            np.arange(self.width, dtype=np.float64),
            np.arange(self.height, dtype=np.float64),
        )
        return boundary_weight(xs, ys, self.width, self.height).ravel()


def build_mesh(view: ViewRecord) -> Mesh:
    """Mesh a completed view, texturing from its best (super-resolved) source."""
    texture, intrinsics = view.best_texture()
    if texture.shape[0] < 2 or texture.shape[1] < 2:
        raise ValueError("mesh source must be at least 2x2")
    colors = texture if texture.ndim == 3 else texture[..., None]
    return Mesh(colors=colors, intrinsics=intrinsics, rotation=view.rotation)


def sample_mesh(mesh: Mesh, dirs_world: np.ndarray):
    """Cast world-frame rays against a mesh.

    Returns (colors (N, C), weights (N,), hit (N,)). A ray hits iff it
    projects in front of the source camera and inside the pixel grid hull;
    color is interpolated over the hit triangle of the containing quad and
    the fusion weight is the source boundary distance at the hit point.
    Entries where hit is False are zero.
    """
    d = dirs_world @ mesh.rotation.matrix
    z = d[:, 2]
    front = z > FACE_CULL_EPS
    zs = np.where(front, z, 1.0)
    K = mesh.intrinsics
    xs = K.fx * d[:, 0] / zs + K.cx
    ys = K.fy * d[:, 1] / zs + K.cy
    w, h = mesh.width, mesh.height
    hit = (
        front
        & (xs >= -EDGE_TOL)
        & (xs <= w - 1 + EDGE_TOL)
        & (ys >= -EDGE_TOL)
        & (ys <= h - 1 + EDGE_TOL)
    )

    channels = mesh.colors.shape[-1]
    colors = np.zeros((dirs_world.shape[0], channels), dtype=np.float64)
    weights = np.zeros(dirs_world.shape[0], dtype=np.float64)
    idx = np.nonzero(hit)[0]
    if idx.size:
        xh = np.clip(xs[idx], 0.0, w - 1.0)
        yh = np.clip(ys[idx], 0.0, h - 1.0)
        x0 = np.minimum(xh.astype(np.int64), w - 2)
        y0 = np.minimum(yh.astype(np.int64), h - 2)
        s = (xh - x0).astype(np.float32)
        t = (yh - y0).astype(np.float32)
        img = mesh.colors
        c00 = img[y0, x0]
        c10 = img[y0, x0 + 1]
        c01 = img[y0 + 1, x0]
        c11 = img[y0 + 1, x0 + 1]
        in_a = (s + t) <= 1.0
        sa, ta = s[:, None], t[:, None]
        tri_a = (np.float32(1.0) - sa - ta) * c00 + sa * c10 + ta * c01
        tri_b = (sa + ta - np.float32(1.0)) * c11 + (np.float32(1.0) - ta) * c10 + (np.float32(1.0) - sa) * c01
        colors[idx] = np.where(in_a[:, None], tri_a, tri_b)
        weights[idx] = boundary_weight(xh, yh, w, h)
    return colors, weights, hit


def camera_ray_grid(K: CameraIntrinsics, R: RotationY) -> np.ndarray:
    """(H*W, 3) world-frame unit rays through every pixel center of a camera."""
    xs, ys = np.meshgrid(
        np.arange(K.width, dtype=np.float64), np.arange(K.height, dtype=np.float64)
    )
    pix = np.column_stack([xs.ravel(), ys.ravel(), np.ones(xs.size)])
    return pixel_to_sphere(pix, K) @ R.matrix.T


def rasterize(meshes, K_target: CameraIntrinsics, R_target: RotationY):
    """Render meshes into a target camera.

    Returns (image float32 (H, W, 3), mask, weight_sum float32 (H, W)) where
    mask is True exactly where no mesh face covers the pixel center (the
    region still needing inpainting). Overlapping meshes are fused by
    boundary-distance weighted averaging.
    """
    if not meshes:
        raise ValueError("rasterize needs at least one mesh")
    h, w = K_target.height, K_target.width
    dirs = camera_ray_grid(K_target, R_target)
    channels = meshes[0].colors.shape[-1]
    color_sum = np.zeros((h * w, channels), dtype=np.float64)
    weight_sum = np.zeros(h * w, dtype=np.float64)
    for mesh in meshes:
        colors, weights, _ = sample_mesh(mesh, dirs)
        color_sum += weights[:, None] * colors
        weight_sum += weights
    covered = weight_sum > 0
    out = np.zeros_like(color_sum)
    out[covered] = color_sum[covered] / weight_sum[covered, None]
    image = out.reshape(h, w, channels).astype(np.float32)
    mask = ~covered.reshape(h, w)
    return image, mask, weight_sum.reshape(h, w).astype(np.float32)


def warp_view(completed, K_target: CameraIntrinsics, R_target: RotationY):
    """Warp all completed views into a target pose; returns (image, inpaint mask)."""
    if not completed:
        raise ValueError("warp_view needs at least one completed view")
    meshes = [build_mesh(v) for v in completed]
    image, mask, _ = rasterize(meshes, K_target, R_target)
    return image, mask
