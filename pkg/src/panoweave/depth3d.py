"""Multi-view depth alignment, panoramic depth fusion, point clouds.

Monocular depth is only defined up to an affine (scale, shift) per view.
Because all views share one camera center, the ray depth of a 3D point is
identical in every view that sees it, so a joint linear least-squares over
per-view (scale, shift) with one anchored view makes the depth maps
consistent; the aligned maps then merge on the equirectangular grid with
the same boundary-distance weighting as color fusion.

Depth is ray/radial depth (distance along the unit ray), always > 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from panoweave.backends import BackendError
from panoweave.fusion import PanoramaCanvas, boundary_weight
from panoweave.geometry import equirect_to_sphere, pixel_to_sphere
from panoweave.imageops import bilinear_sample, resize_float
from panoweave.warp import Mesh, sample_mesh

logger = logging.getLogger(__name__)

REGULARIZER = 1e-6
MIN_PAIR_SAMPLES = 16


@dataclass
class DepthAlignment:
    """Per-view scale and shift; the anchor view has (1, 0)."""

    scales: np.ndarray
    shifts: np.ndarray
    residual_rms: float
    regularized: bool = False

    def __post_init__(self):
        if (self.scales <= 0).any():
            raise ValueError(f"alignment produced nonpositive scales: {self.scales}")


@dataclass
class PointCloud:
    points: np.ndarray
    colors: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    def write(self, path) -> None:
        from panoweave.fileio import write_ply

        write_ply(path, self.points, self.colors)


def _depth_intrinsics(view):
    """Intrinsics matching the resolution of the view's depth map."""
    h, w = view.depth.shape
    scale = w / view.intrinsics.width
    return view.intrinsics.scaled(scale) if scale != 1.0 else view.intrinsics


def _pair_samples(view_i, view_j, grid: int):
    """Ray-depth pairs on a fixed grid of view_i pixels that view_j also sees."""
    Ki = _depth_intrinsics(view_i)
    Kj = _depth_intrinsics(view_j)
    xs = np.linspace(0.0, Ki.width - 1.0, grid)
    ys = np.linspace(0.0, Ki.height - 1.0, grid)
    gx, gy = np.meshgrid(xs, ys)
    pix = np.column_stack([gx.ravel(), gy.ravel(), np.ones(gx.size)])
    dirs_world = pixel_to_sphere(pix, Ki) @ view_i.rotation.matrix.T
    d_j = dirs_world @ view_j.rotation.matrix
    z = d_j[:, 2]
    front = z > 1e-6
    zs = np.where(front, z, 1.0)
    px = Kj.fx * d_j[:, 0] / zs + Kj.cx
    py = Kj.fy * d_j[:, 1] / zs + Kj.cy
    inside = front & (px >= 0) & (px <= Kj.width - 1) & (py >= 0) & (py <= Kj.height - 1)
    if not inside.any():
        return None
    di = bilinear_sample(view_i.depth, gx.ravel()[inside], gy.ravel()[inside])
    dj = bilinear_sample(view_j.depth, px[inside], py[inside])
    return di, dj


def align_depths(views, grid: int = 64, anchor: int = 0) -> DepthAlignment:
    """Solve per-view (scale, shift) so overlapping ray depths agree.

    Joint least squares over all overlapping pairs; the anchor view is
    pinned at (1, 0). A rank-deficient system (e.g. constant depths) is
    re-solved with a small pull toward (1, 0) and a warning.
    """
    n = len(views)
    if n < 1:
        raise ValueError("align_depths needs at least one view")
    for v in views:
        if v.depth is None:
            raise ValueError("every view needs a depth map before alignment")
    if n == 1:
        return DepthAlignment(np.ones(1), np.zeros(1), 0.0)

    free = [i for i in range(n) if i != anchor]
    col = {v: k for k, v in enumerate(free)}
    rows_a = []
    rows_b = []
    for i in range(n):
        for j in range(i + 1, n):
            samples = _pair_samples(views[i], views[j], grid)
            if samples is None or len(samples[0]) < MIN_PAIR_SAMPLES:
                continue
            di, dj = samples
            # equation per sample: s_i di + t_i - s_j dj - t_j = 0, anchor fixed at (1, 0)
            m = len(di)
            a = np.zeros((m, 2 * (n - 1)))
            b = np.zeros(m)
            if i == anchor:
                b -= di
            else:
                a[:, col[i]] = di
                a[:, n - 1 + col[i]] = 1.0
            if j == anchor:
                b += dj
            else:
                a[:, col[j]] -= dj
                a[:, n - 1 + col[j]] -= 1.0
            rows_a.append(a)
            rows_b.append(b)
    if not rows_a:
        raise ValueError("no overlapping view pairs with enough samples")
    A = np.concatenate(rows_a)
    b = np.concatenate(rows_b)

    solution, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    regularized = False
    if rank < 2 * (n - 1):
        logger.warning(
            "depth alignment system is rank deficient (rank %d of %d); regularizing toward identity",
            rank,
            2 * (n - 1),
        )
        lam = np.sqrt(REGULARIZER)
        A_reg = np.concatenate([A, lam * np.eye(2 * (n - 1))])
        target = np.concatenate([np.ones(n - 1), np.zeros(n - 1)])
        b_reg = np.concatenate([b, lam * target])
        solution, _, _, _ = np.linalg.lstsq(A_reg, b_reg, rcond=None)
        regularized = True

    scales = np.ones(n)
    shifts = np.zeros(n)
    for v, k in col.items():
        scales[v] = solution[k]
        shifts[v] = solution[n - 1 + k]
    residual = A @ solution - b
    rms = float(np.sqrt(np.mean(residual**2)))
    return DepthAlignment(scales=scales, shifts=shifts, residual_rms=rms, regularized=regularized)


def alignment_residual_rms(views, alignment: DepthAlignment, grid: int = 64) -> float:
    """RMS of pairwise aligned-depth disagreement; identity alignment gives the baseline."""
    total = 0.0
    count = 0
    n = len(views)
    for i in range(n):
        for j in range(i + 1, n):
            samples = _pair_samples(views[i], views[j], grid)
            if samples is None or len(samples[0]) < MIN_PAIR_SAMPLES:
                continue
            di, dj = samples
            ri = alignment.scales[i] * di + alignment.shifts[i]
            rj = alignment.scales[j] * dj + alignment.shifts[j]
            total += float(np.sum((ri - rj) ** 2))
            count += len(di)
    return float(np.sqrt(total / max(count, 1)))


def apply_alignment(views, alignment: DepthAlignment):
    """New ViewRecords with depth replaced by scale * depth + shift."""
    from panoweave.warp import ViewRecord

    out = []
    for view, s, t in zip(views, alignment.scales, alignment.shifts):
        depth = None if view.depth is None else (s * view.depth + t).astype(np.float32)
        out.append(
            ViewRecord(
                image=view.image,
                intrinsics=view.intrinsics,
                rotation=view.rotation,
                sr_image=view.sr_image,
                depth=depth,
            )
        )
    return out


def estimate_aligned_depths(views, depth_backend, superres_depth: bool = False):
    """Estimate, jointly align, and optionally super-resolve per-view depth.

    Returns (new views carrying aligned depth, DepthAlignment). With
    ``superres_depth`` every view that has a super-resolved texture gets its
    aligned depth patch-super-resolved to that resolution.
    """
    from panoweave.warp import ViewRecord

    with_depth = []
    for view in views:
        depth = np.asarray(depth_backend.estimate_depth(view.image), dtype=np.float32)
        with_depth.append(
            ViewRecord(
                image=view.image,
                intrinsics=view.intrinsics,
                rotation=view.rotation,
                sr_image=view.sr_image,
                depth=depth,
            )
        )
    alignment = align_depths(with_depth)
    aligned = apply_alignment(with_depth, alignment)
    if superres_depth:
        for view in aligned:
            if view.sr_image is not None:
                view.depth = patched_depth_superres(view.sr_image, view.depth, depth_backend)
    return aligned, alignment


def fuse_depth_panorama(views, alignment: DepthAlignment = None, pano_width: int = 4096, block_rows: int = 256):
    """Merge aligned per-view depths into an equirectangular depth map.

    Same compositing path as color: boundary-distance weighted average on
    the panorama grid. ``alignment=None`` treats the depths as already
    aligned. Returns (depth float32 (H, W), covered mask); depth is 0
    where uncovered.
    """
    if alignment is None:
        alignment = DepthAlignment(np.ones(len(views)), np.zeros(len(views)), 0.0)
    if len(views) != len(alignment.scales):
        raise ValueError("alignment size does not match view count")
    canvas = PanoramaCanvas.create(pano_width, channels=1)
    h, w = canvas.height, canvas.width
    meshes = []
    for view, s, t in zip(views, alignment.scales, alignment.shifts):
        if view.depth is None:
            raise ValueError("every view needs a depth map")
        aligned = (s * view.depth + t).astype(np.float32)[..., None]
        meshes.append(Mesh(colors=aligned, intrinsics=_depth_intrinsics(view), rotation=view.rotation))
    us = np.arange(w, dtype=np.float64)
    for row0 in range(0, h, block_rows):
        row1 = min(row0 + block_rows, h)
        vs = np.arange(row0, row1, dtype=np.float64)
        uu, vv = np.meshgrid(us, vs)
        dirs = equirect_to_sphere(uu.ravel(), vv.ravel(), w, h)
        for mesh in meshes:
            vals, weights, valid = sample_mesh(mesh, dirs)
            shape = (row1 - row0, w)
            canvas.add_block(row0, vals.reshape(shape + (1,)), weights.reshape(shape), valid.reshape(shape))
    depth, covered = canvas.finalize()
    return depth[..., 0], covered


def depth_to_pointcloud(pano_rgb: np.ndarray, pano_depth: np.ndarray, stride: int = 1, covered=None) -> PointCloud:
    """Unproject covered panorama pixels to 3D points with their colors."""
    h, w = pano_depth.shape
    if pano_rgb.shape[:2] != (h, w):
        raise ValueError(f"rgb {pano_rgb.shape[:2]} and depth {(h, w)} dimensions differ")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    vs, us = np.meshgrid(np.arange(0, h, stride), np.arange(0, w, stride), indexing="ij")
    us = us.ravel()
    vs = vs.ravel()
    depth = pano_depth[vs, us]
    keep = depth > 0
    if covered is not None:
        keep &= covered[vs, us]
    us, vs, depth = us[keep], vs[keep], depth[keep]
    dirs = equirect_to_sphere(us.astype(np.float64), vs.astype(np.float64), w, h)
    points = (dirs * depth[:, None]).astype(np.float32)
    colors = pano_rgb[vs, us]
    return PointCloud(points=points, colors=colors)


def patch_grid_origins(sr_size: int, patch_size: int, count: int = 13):
    """Origins of the overlapping patch grid along one axis."""
    span = sr_size - patch_size
    if span % (count - 1) != 0:
        raise ValueError(f"patch grid does not tile: ({sr_size} - {patch_size}) % {count - 1} != 0")
    stride = span // (count - 1)
    return [i * stride for i in range(count)]


def patched_depth_superres(sr_image: np.ndarray, low_depth: np.ndarray, depth_backend, grid_count: int = 13):
    """Estimate high-resolution depth from overlapping patches of the SR image.

    Each patch (same resolution as the low-res view, 13x13 grid with equal
    overlaps) is estimated by the backend, scale/shift-aligned to the
    bicubic-upsampled low-resolution depth over the patch footprint, and
    the patches are blended with boundary-distance weights. A failed patch
    falls back to the upsampled low-resolution depth.
    """
    sr_h, sr_w = sr_image.shape[:2]
    lo_h, lo_w = low_depth.shape
    if sr_h != sr_w or lo_h != lo_w:
        raise ValueError("patched depth super-resolution expects square rasters")
    patch = lo_w
    upsampled = resize_float(low_depth, sr_w, sr_h, "bicubic")
    origins = patch_grid_origins(sr_w, patch, grid_count)
    weight_patch = boundary_weight(*np.meshgrid(np.arange(patch), np.arange(patch)), patch, patch)

    depth_sum = np.zeros((sr_h, sr_w), dtype=np.float64)
    weight_sum = np.zeros((sr_h, sr_w), dtype=np.float64)
    for oy in origins:
        for ox in origins:
            ref = upsampled[oy : oy + patch, ox : ox + patch]
            try:
                est = np.asarray(
                    depth_backend.estimate_depth(sr_image[oy : oy + patch, ox : ox + patch]),
                    dtype=np.float64,
                )
                aligned = _fit_scale_shift(est, ref)
            except BackendError as exc:
                logger.warning("depth patch (%d, %d) failed (%s); using upsampled low-res", ox, oy, exc)
                aligned = ref
            depth_sum[oy : oy + patch, ox : ox + patch] += weight_patch * aligned
            weight_sum[oy : oy + patch, ox : ox + patch] += weight_patch
    out = depth_sum / weight_sum
    return np.maximum(out, 1e-6).astype(np.float32)


def _fit_scale_shift(est: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Least-squares s * est + t ~= ref; constant estimates fall back to shift-only."""
    e = np.asarray(est, dtype=np.float64).ravel()
    r = np.asarray(ref, dtype=np.float64).ravel()
    var = float(np.var(e))
    if var < 1e-12:
        s = 1.0
    else:
        s = float(np.cov(e, r, bias=True)[0, 1] / var)
    t = float(r.mean() - s * e.mean())
    return s * est + t
