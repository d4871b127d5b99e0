"""Pinhole and spherical camera math.

Coordinate conventions used throughout the package:

  Camera frame (standard computer vision):
    x: right, y: down, z: forward (optical axis).
  World frame:
    the camera frame of the reference view (yaw 0). The up axis is -y.
  Yaw:
    rotation about the up axis (-y); positive angles pan the camera to
    the right. ``rotation_y(theta).matrix`` maps camera-frame directions
    of a camera with yaw ``theta`` into the world frame.
  Equirectangular raster (width = 2 * height):
    u ~ longitude, lon = atan2(x, z) in (-pi, pi], u = (lon/2pi + 0.5)*W,
    wrapping modulo W, so the seam (lon = +-180 deg) sits at u = 0 and
    the reference view's forward ray lands at the panorama center.
    v ~ latitude, lat = asin(y) in [-pi/2, pi/2], v = (lat/pi + 0.5)*H.

All functions are pure and accept numpy arrays broadcast-style wherever a
scalar is documented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Rays with z below this are "behind" the camera for projection purposes.
EPS_Z = 1e-6


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics with the principal point in pixel units."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 < self.cx < self.width) or not (0 < self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside raster {self.width}x{self.height}"
            )

    @property
    def matrix(self) -> np.ndarray:
        """3x3 K matrix."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Intrinsics of the same field of view at ``factor`` times the resolution."""
        return CameraIntrinsics(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=self.cx * factor,
            cy=self.cy * factor,
            width=int(round(self.width * factor)),
            height=int(round(self.height * factor)),
        )


def intrinsics_from_fov(fov_deg: float, width: int, height: int) -> CameraIntrinsics:
    """Build intrinsics for a square-pixel camera from its horizontal FoV.

    fx = fy = (width/2) / tan(fov/2), principal point at the raster center.
    """
    if not 0.0 < fov_deg < 180.0:
        raise ValueError(f"fov_deg must be in (0, 180), got {fov_deg}")
    if width < 2 or height < 2:
        raise ValueError(f"raster must be at least 2x2, got {width}x{height}")
    f = (width / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
    return CameraIntrinsics(fx=f, fy=f, cx=width / 2.0, cy=height / 2.0, width=width, height=height)


@dataclass(frozen=True)
class RotationY:
    """Yaw rotation (about the up axis, -y); camera-to-world for a panned camera."""

    angle_deg: float
    matrix: np.ndarray = field(compare=False)

    def __post_init__(self):
        m = self.matrix
        if m.shape != (3, 3) or np.abs(m.T @ m - np.eye(3)).max() > 1e-9:
            raise ValueError("rotation matrix must be 3x3 orthonormal")
        if np.linalg.det(m) < 0:
            raise ValueError("rotation matrix must have determinant +1")

    @property
    def inverse_matrix(self) -> np.ndarray:
        return self.matrix.T


def rotation_y(angle_deg: float) -> RotationY:
    """Rotation of ``angle_deg`` about the up axis; positive pans right.

    The angle is reduced modulo 360 before evaluating the trigonometry so
    equivalent angles (e.g. 0 and 360) produce bit-identical matrices.
    """
    t = math.radians(angle_deg % 360.0)
    c, s = math.cos(t), math.sin(t)
    m = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return RotationY(angle_deg=angle_deg, matrix=m)


def pixel_to_sphere(v, K: CameraIntrinsics) -> np.ndarray:
    """Map homogeneous pixel coordinates (x, y, 1) to unit directions.

    ``v`` is (3,) or (N, 3); returns matching shape, rows K^-1 v / ||K^-1 v||.
    """
    v = np.asarray(v, dtype=np.float64)
    x = (v[..., 0] - K.cx) / K.fx
    y = (v[..., 1] - K.cy) / K.fy
    z = np.ones_like(x)
    d = np.stack([x, y, z], axis=-1)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def sphere_to_pixel(direction, K: CameraIntrinsics):
    """Project unit directions to pixel coordinates.

    Returns ``(pixels, in_front)`` where pixels is (..., 2) and in_front is
    a boolean marking directions with z > EPS_Z; pixel values for rays at
    or behind the camera plane are unspecified (computed with z clamped).
    """
    d = np.asarray(direction, dtype=np.float64)
    z = d[..., 2]
    in_front = z > EPS_Z
    safe_z = np.where(in_front, z, 1.0)
    px = K.fx * d[..., 0] / safe_z + K.cx
    py = K.fy * d[..., 1] / safe_z + K.cy
    return np.stack([px, py], axis=-1), in_front


def sphere_to_equirect(direction, pano_width: int, pano_height: int, validate: bool = True):
    """Map unit directions to equirectangular pixel coordinates (u, v).

    u wraps modulo ``pano_width``; v is the raw latitude coordinate in
    [0, pano_height] (the south pole maps to exactly pano_height).
    """
    d = np.asarray(direction, dtype=np.float64)
    if validate:
        norms = np.linalg.norm(d, axis=-1)
        if np.abs(norms - 1.0).max() > 1e-6:
            raise ValueError("sphere_to_equirect requires unit-norm directions")
    lon = np.arctan2(d[..., 0], d[..., 2])
    lat = np.arcsin(np.clip(d[..., 1], -1.0, 1.0))
    u = np.mod((lon / (2.0 * math.pi) + 0.5) * pano_width, pano_width)
    v = (lat / math.pi + 0.5) * pano_height
    return np.stack([u, v], axis=-1)


def equirect_to_sphere(u, v, pano_width: int, pano_height: int) -> np.ndarray:
    """Inverse of sphere_to_equirect: pixel coordinates to unit directions."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    lon = (u / pano_width - 0.5) * 2.0 * math.pi
    lat = (v / pano_height - 0.5) * math.pi
    cl = np.cos(lat)
    return np.stack([cl * np.sin(lon), np.sin(lat), cl * np.cos(lon)], axis=-1)


def angular_step(x, cx: float, fx: float):
    """Angular distance between the camera rays of horizontal pixels x and x+1.

    alpha = |arctan(|x+1-cx|/fx) - arctan(|x-cx|/fx)|; strictly decreasing
    in |x - cx|, i.e. centered pixels subtend larger angles than peripheral
    ones (the source of interpolation blur when warping away from center).
    """
    if fx <= 0:
        raise ValueError(f"fx must be positive, got {fx}")
    x = np.asarray(x, dtype=np.float64)
    return np.abs(np.arctan(np.abs(x + 1.0 - cx) / fx) - np.arctan(np.abs(x - cx) / fx))
