"""Deterministic procedural test imagery.

Seeded, smooth, structured textures used by the mock text-to-image backend,
the demos, and the test corpus. Everything is a pure function of its seed.
"""

from __future__ import annotations

import hashlib

import numpy as np


def seed_from_text(text: str, base_seed: int = 0) -> int:
    """Stable 63-bit seed mixing a text with a base seed (hash() is salted; sha256 is not)."""
    digest = hashlib.sha256(f"{base_seed}:{text}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def procedural_image(seed: int, width: int = 512, height: int = 512, cycles: float = 4.0) -> np.ndarray:
    """Smooth random texture in [0.05, 0.95], (height, width, 3) float32.

    A sum of low-frequency oriented waves plus a radial falloff; ``cycles``
    bounds the highest spatial frequency in cycles per image side.
    """
    rng = np.random.default_rng(seed)
    ys, xs = np.meshgrid(
        np.linspace(-1.0, 1.0, height), np.linspace(-1.0, 1.0, width), indexing="ij"
    )
    img = np.zeros((height, width, 3), dtype=np.float64)
    for c in range(3):
        acc = np.zeros((height, width))
        for _ in range(6):
            fx, fy = rng.uniform(-cycles, cycles, 2)
            phase = rng.uniform(0, 2 * np.pi)
            amp = rng.uniform(0.3, 1.0)
            acc += amp * np.cos(np.pi * (fx * xs + fy * ys) + phase)
        acc += rng.uniform(-0.5, 0.5) * (xs**2 + ys**2)
        img[..., c] = acc
    lo, hi = img.min(), img.max()
    img = 0.05 + 0.9 * (img - lo) / max(hi - lo, 1e-9)
    return img.astype(np.float32)


def checker_image(width: int = 512, height: int = 512, period: int = 16, contrast: float = 0.8) -> np.ndarray:
    """High-frequency checkerboard for sharpness comparisons."""
    ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    cells = ((xs // period) + (ys // period)) % 2
    base = 0.5 + contrast * (cells - 0.5)
    return np.repeat(base[..., None], 3, axis=2).astype(np.float32)
