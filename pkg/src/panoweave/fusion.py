"""Boundary-distance weighting, weighted pixel fusion, equirectangular compositing.

Overlapping view contributions are merged as a weighted average where each
pixel's weight is its distance to the nearest boundary of its source image
(plus a one-pixel floor so boundary pixels never divide by zero). The same
rule feathers overlaps both during intermediate warps and in the final
panorama.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from panoweave.geometry import equirect_to_sphere


def boundary_weight(x, y, width: int, height: int):
    """Fusion weight of pixel (x, y): distance to the nearest image edge + 1."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.minimum.reduce([x, y, width - 1.0 - x, height - 1.0 - y]) + 1.0


def fuse_pixels(colors, weights):
    """Weighted average of pixel colors: sum(w_i * c_i) / sum(w_i).

    ``colors`` is (N,) or (N, C); ``weights`` is (N,) nonnegative with a
    positive sum. The result is a convex combination of the inputs.
    """
    c = np.asarray(colors, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if c.shape[0] != w.shape[0] or c.shape[0] == 0:
        raise ValueError("colors and weights must be nonempty and the same length")
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError("weight sum must be positive")
    if c.ndim == 1:
        return float((w * c).sum() / total)
    return (w[:, None] * c).sum(axis=0) / total


@dataclass
class PanoramaCanvas:
    """Equirectangular accumulation buffers (width = 2 * height)."""

    width: int
    height: int
    color_sum: np.ndarray
    weight_sum: np.ndarray
    coverage: np.ndarray

    @classmethod
    def create(cls, pano_width: int, channels: int = 3) -> "PanoramaCanvas":
        if pano_width % 2 != 0:
            raise ValueError(f"pano_width must be even, got {pano_width}")
        h = pano_width // 2
        return cls(
            width=pano_width,
            height=h,
            color_sum=np.zeros((h, pano_width, channels), dtype=np.float64),
            weight_sum=np.zeros((h, pano_width), dtype=np.float64),
            coverage=np.zeros((h, pano_width), dtype=np.int32),
        )

    def add_block(self, row0: int, colors: np.ndarray, weights: np.ndarray, valid: np.ndarray):
        """Accumulate one view's contribution for rows [row0, row0 + block)."""
        row1 = row0 + valid.shape[0]
        w = np.where(valid, weights, 0.0)
        self.color_sum[row0:row1] += w[..., None] * colors
        self.weight_sum[row0:row1] += w
        self.coverage[row0:row1] += valid.astype(np.int32)

    def finalize(self):
        """Return (color image float32, covered mask). Color is 0 where uncovered."""
        covered = self.weight_sum > 0
        denom = np.where(covered, self.weight_sum, 1.0)
        img = (self.color_sum / denom[..., None]).astype(np.float32)
        img[~covered] = 0.0
        return img, covered


def _fill_pole_rows(image: np.ndarray, covered: np.ndarray, margin: int = 2):
    """Copy the nearest covered row's color into uncovered pixels of the pole rows.

    The equirectangular parameterization is degenerate at the poles, so those
    rows can stay uncovered even for full-coverage view sets; a deterministic
    fill keeps the output total. Coverage flags are left untouched.
    """
    h, w = covered.shape
    first = np.argmax(covered, axis=0)
    last = h - 1 - np.argmax(covered[::-1], axis=0)
    cols = np.nonzero(covered.any(axis=0))[0]
    for r in range(min(margin, h)):
        fill = cols[(~covered[r, cols]) & (first[cols] > r)]
        image[r, fill] = image[first[fill], fill]
    for r in range(h - 1, max(h - 1 - margin, -1), -1):
        fill = cols[(~covered[r, cols]) & (last[cols] < r)]
        image[r, fill] = image[last[fill], fill]


def compose_panorama(views, pano_width: int = 4096, block_rows: int = 256):
    """Merge completed views into one equirectangular image.

    Each view is sampled through its mesh on the unit sphere (preferring the
    super-resolved texture) at every panorama pixel direction, weighted by
    source-boundary distance, and accumulated; the final color is the
    weight-normalized sum. Returns (image float32 (H, W, 3), covered mask).
    """
    from panoweave.warp import build_mesh, sample_mesh

    if not views:
        raise ValueError("compose_panorama needs at least one view")
    canvas = PanoramaCanvas.create(pano_width)
    h, w = canvas.height, canvas.width
    meshes = [build_mesh(v) for v in views]
    us = np.arange(w, dtype=np.float64)
    for row0 in range(0, h, block_rows):
        row1 = min(row0 + block_rows, h)
        vs = np.arange(row0, row1, dtype=np.float64)
        uu, vv = np.meshgrid(us, vs)
        dirs = equirect_to_sphere(uu.ravel(), vv.ravel(), w, h)
        for mesh in meshes:
            colors, weights, valid = sample_mesh(mesh, dirs)
            shape = (row1 - row0, w)
            canvas.add_block(
                row0,
                colors.reshape(shape + (colors.shape[-1],)),
                weights.reshape(shape),
                valid.reshape(shape),
            )
    image, covered = canvas.finalize()
    _fill_pole_rows(image, covered)
    return image, covered
