"""Raster utilities shared across modules: dtype bridging and float resampling."""

from __future__ import annotations

import numpy as np
from PIL import Image

_RESAMPLE = {
    "bicubic": Image.Resampling.BICUBIC,
    "bilinear": Image.Resampling.BILINEAR,
    "box": Image.Resampling.BOX,
    "nearest": Image.Resampling.NEAREST,
}


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Float [0, 1] image to uint8 with round-half-away quantization."""
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def to_float(img: np.ndarray) -> np.ndarray:
    """uint8 image to float32 in [0, 1]; float input passes through as float32."""
    img = np.asarray(img)
    if img.dtype == np.uint8:
        return (img.astype(np.float32)) / np.float32(255.0)
    return img.astype(np.float32)


def resize_float(img: np.ndarray, width: int, height: int, kind: str = "bicubic") -> np.ndarray:
    """Resample a float image ((H, W) or (H, W, C)) to width x height.

    Uses Pillow's float path per channel; deterministic for a given Pillow
    build. "box" gives area averaging for downsampling without ringing.
    """
    resample = _RESAMPLE[kind]
    img = np.asarray(img, dtype=np.float32)
    if img.ndim == 2:
        out = Image.fromarray(img, mode="F").resize((width, height), resample)
        return np.asarray(out, dtype=np.float32)
    chans = [
        np.asarray(Image.fromarray(img[..., c], mode="F").resize((width, height), resample))
        for c in range(img.shape[-1])
    ]
    return np.stack(chans, axis=-1).astype(np.float32)


def bilinear_sample(img: np.ndarray, x, y, wrap_x: bool = False) -> np.ndarray:
    """Bilinear lookup of (H, W) or (H, W, C) at continuous pixel coords.

    ``wrap_x`` treats the x axis as periodic (equirectangular longitude);
    y is always clamped to the raster.
    """
    img = np.asarray(img)
    h, w = img.shape[:2]
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if wrap_x:
        x = np.mod(x, w)
        x0 = np.floor(x).astype(np.int64)
        x1 = np.mod(x0 + 1, w)
        fx = x - x0
        x0 = np.mod(x0, w)
    else:
        x = np.clip(x, 0.0, w - 1.0)
        x0 = np.minimum(x.astype(np.int64), w - 2) if w > 1 else np.zeros_like(x, np.int64)
        x1 = np.minimum(x0 + 1, w - 1)
        fx = x - x0
    y = np.clip(y, 0.0, h - 1.0)
    y0 = np.minimum(y.astype(np.int64), h - 2) if h > 1 else np.zeros_like(y, np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    fy = y - y0
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def mean_gradient_magnitude(img: np.ndarray) -> float:
    """Mean first-difference gradient magnitude, a cheap sharpness proxy."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        img = img.mean(axis=-1)
    gx = np.diff(img, axis=1)
    gy = np.diff(img, axis=0)
    return float(np.abs(gx).mean() + np.abs(gy).mean())


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; returns inf for identical inputs."""
    mse = float(np.mean((np.asarray(a, np.float64) - np.asarray(b, np.float64)) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(peak * peak / mse)
