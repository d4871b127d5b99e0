"""Deterministic mock backends.

Every mock is a pure function of its inputs and seed, so pipeline runs and
tests reproduce bit-exactly. The chat and VQA mocks run in two modes:

  scripted  -- construct with ``script=[(pattern, response), ...]``; each
               call consumes the first unused entry whose pattern is a
               substring of the query, and an unmatched query or exhausted
               script raises MockScriptError (never a silent default).
  default   -- without a script, responses are synthesized from the query
               and the mock's seed; used by CLI mock mode.
"""

from __future__ import annotations

import hashlib
import threading

import numpy as np

from panoweave.backends import MockScriptError
from panoweave.geometry import intrinsics_from_fov, rotation_y
from panoweave.imageops import resize_float
from panoweave.synthetic import procedural_image, seed_from_text

_FILL_FALLBACK = 0.5


def image_digest(img: np.ndarray) -> str:
    """Stable short digest of a raster (dtype-sensitive)."""
    arr = np.ascontiguousarray(img)
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(str(arr.dtype).encode())
    h.update(arr.tobytes())
    return h.hexdigest()[:16]


def push_pull_fill(image: np.ndarray, mask: np.ndarray, relax_iters: int = 30) -> np.ndarray:
    """Fill masked pixels by boundary color diffusion.

    A push-pull pyramid seeds the unknown region from pooled known content,
    then a few Jacobi sweeps relax masked pixels toward their neighborhood
    average so the fill stays continuous across the mask boundary. Known
    pixels are untouched; an all-unknown image fills with mid gray.
    """
    img = np.asarray(image, dtype=np.float32)
    known = ~np.asarray(mask, dtype=bool)
    w = known.astype(np.float32)
    filled = _push_pull(img * w[..., None], w)
    filled = np.where(known[..., None], img, filled)
    for _ in range(relax_iters):
        padded = np.pad(filled, [(1, 1), (1, 1), (0, 0)], mode="edge")
        avg = 0.25 * (padded[:-2, 1:-1] + padded[2:, 1:-1] + padded[1:-1, :-2] + padded[1:-1, 2:])
        filled = np.where(known[..., None], img, avg)
    return filled.astype(np.float32)


def _pool2(arr: np.ndarray) -> np.ndarray:
    h, w = arr.shape[:2]
    ph, pw = h + (h % 2), w + (w % 2)
    if (ph, pw) != (h, w):
        pad = [(0, ph - h), (0, pw - w)] + [(0, 0)] * (arr.ndim - 2)
        arr = np.pad(arr, pad)
    return arr.reshape(ph // 2, 2, pw // 2, 2, *arr.shape[2:]).sum(axis=(1, 3))


def _push_pull(color_sum: np.ndarray, weight: np.ndarray) -> np.ndarray:
    h, w = weight.shape
    known = weight > 0
    if known.all():
        return color_sum / weight[..., None]
    if h == 1 and w == 1:
        if known[0, 0]:
            return color_sum / weight[..., None]
        return np.full_like(color_sum, _FILL_FALLBACK)
    coarse = _push_pull(_pool2(color_sum), _pool2(weight))
    up = resize_float(coarse, w, h, "bilinear")
    safe = np.where(known, weight, 1.0)
    out = color_sum / safe[..., None]
    return np.where(known[..., None], out, up)


class MockInpaintBackend:
    """Boundary-diffusion fill plus low-amplitude seeded noise on masked pixels."""

    def __init__(self, noise_amplitude: float = 0.01):
        self.noise_amplitude = float(noise_amplitude)

    def inpaint(self, image, mask, prompt: str, negative_prompt: str, seed: int):
        image = np.asarray(image, dtype=np.float32)
        mask = np.asarray(mask, dtype=bool)
        if image.shape[:2] != mask.shape:
            raise ValueError(f"image {image.shape[:2]} and mask {mask.shape} differ")
        if not mask.any():
            return image.copy()
        filled = push_pull_fill(image, mask)
        rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
        noise = rng.normal(0.0, self.noise_amplitude, image.shape).astype(np.float32)
        out = np.clip(filled + noise, 0.0, 1.0)
        return np.where(mask[..., None], out, image).astype(np.float32)


class _ScriptedText:
    def __init__(self, script):
        self._entries = [tuple(e) for e in script]
        self._used = [False] * len(self._entries)
        self._lock = threading.Lock()

    def take(self, query: str, digest: str | None = None) -> str:
        with self._lock:
            for i, entry in enumerate(self._entries):
                if self._used[i]:
                    continue
                if len(entry) == 2:
                    pattern, response = entry
                    want_digest = None
                else:
                    pattern, want_digest, response = entry
                if pattern in query and (want_digest in (None, "*", digest)):
                    self._used[i] = True
                    return response
        raise MockScriptError(f"no scripted response left for query: {query[:120]!r}")


_LAYOUT_PHRASES = [
    "a weathered stone archway",
    "tall grass swaying by a fence",
    "a cluster of paper lanterns",
    "an old wooden bench",
    "shelves stacked with clay pots",
    "a narrow staircase in shadow",
    "light falling through tall windows",
    "a mural of fading colors",
    "low shrubs along a gravel path",
    "a quiet doorway framed in ivy",
    "ripples crossing a shallow pool",
    "folded cloth over a railing",
]

_OBJECT_WORDS = ["lantern", "bench", "archway", "pot", "mural", "pool"]


class MockChatBackend:
    """Scripted or synthesized single-turn chat."""

    def __init__(self, script=None, seed: int = 0):
        self._script = _ScriptedText(script) if script is not None else None
        self.seed = int(seed)

    def chat(self, prompt: str) -> str:
        if self._script is not None:
            return self._script.take(prompt)
        return self._default(prompt)

    def _default(self, prompt: str) -> str:
        rng = np.random.default_rng(seed_from_text(prompt, self.seed))
        if "Generate 6 rotated views" in prompt:
            picks = rng.choice(len(_LAYOUT_PHRASES), size=6, replace=False)
            return "\n".join(
                f"View {i + 1}: We see {_LAYOUT_PHRASES[p]}." for i, p in enumerate(picks)
            )
        if "Modify the sentence:" in prompt:
            start = prompt.index("Modify the sentence:") + len("Modify the sentence:")
            end = prompt.index(" so that we remove")
            sentence = prompt[start:end].strip()
            return sentence.split(" with ")[0].strip()
        if "two major foreground objects" in prompt:
            picks = rng.choice(len(_OBJECT_WORDS), size=2, replace=False)
            return "\n".join(f"We see: {_OBJECT_WORDS[p]}" for p in picks)
        if "Do we often see multiple" in prompt:
            return "no" if rng.integers(0, 2) == 0 else "yes"
        return "a quiet scene"


class MockVqaBackend:
    """Scripted or synthesized visual question answering.

    Scripted entries are (question_pattern, response) or
    (question_pattern, image_digest_or_star, response).
    """

    def __init__(self, script=None, seed: int = 0):
        self._script = _ScriptedText(script) if script is not None else None
        self.seed = int(seed)

    def vqa(self, image, question: str) -> str:
        if self._script is not None:
            return self._script.take(question, image_digest(np.asarray(image)))
        return self._default(question)

    def _default(self, question: str) -> str:
        if "What is this place" in question:
            return "a procedural courtyard"
        if "foreground and background" in question:
            return "smooth color fields in the foreground and soft gradients in the background"
        if "Is there a" in question:
            return "no"
        return "unknown"


class MockSuperresBackend:
    """Deterministic bicubic 4x upsampling."""

    def superresolve(self, image, factor: int = 4):
        if factor != 4:
            raise ValueError(f"superresolve supports factor 4 only, got {factor}")
        image = np.asarray(image, dtype=np.float32)
        h, w = image.shape[:2]
        out = resize_float(image, w * 4, h * 4, "bicubic")
        return np.clip(out, 0.0, 1.0)


class MockDepthBackend:
    """Analytic scene depth (ray/radial depth, scene units).

    Scenes, all content-blind (only the raster size matters):
      constant       -- depth = value everywhere
      frontal_plane  -- wall at camera-frame z = value: depth = value / dz
      floor          -- horizontal planes at height value above and below
                        the camera: depth = value / |dy|, clamped to max_depth
                        (yaw-invariant, so multiple views stay consistent)
      sphere         -- sphere of radius value around center; camera at origin
    """

    def __init__(self, scene: str = "constant", value: float = 2.0, fov_deg: float = 100.0,
                 center=(0.0, 0.0, 0.0), max_depth: float = 1000.0):
        if scene not in ("constant", "frontal_plane", "floor", "sphere"):
            raise ValueError(f"unknown mock depth scene {scene!r}")
        self.scene = scene
        self.value = float(value)
        self.fov_deg = float(fov_deg)
        self.center = np.asarray(center, dtype=np.float64)
        self.max_depth = float(max_depth)

    def estimate_depth(self, image):
        h, w = np.asarray(image).shape[:2]
        K = intrinsics_from_fov(self.fov_deg, w, h)
        from panoweave.warp import camera_ray_grid

        dirs = camera_ray_grid(K, rotation_y(0.0))
        depth = self.depth_along(dirs).reshape(h, w)
        return depth.astype(np.float32)

    def depth_along(self, dirs: np.ndarray) -> np.ndarray:
        """Ray depth for unit directions (N, 3); the analytic oracle hook."""
        d = np.asarray(dirs, dtype=np.float64)
        if self.scene == "constant":
            return np.full(d.shape[0], self.value)
        if self.scene == "frontal_plane":
            dz = np.maximum(d[:, 2], self.value / self.max_depth)
            return np.minimum(self.value / dz, self.max_depth)
        if self.scene == "floor":
            dy = np.maximum(np.abs(d[:, 1]), self.value / self.max_depth)
            return np.minimum(self.value / dy, self.max_depth)
        dc = d @ self.center
        disc = dc * dc - (self.center @ self.center) + self.value * self.value
        return dc + np.sqrt(np.maximum(disc, 0.0))


class MockTextToImageBackend:
    """Seeded procedural texture keyed on (prompt, seed)."""

    def __init__(self, width: int = 512, height: int = 512):
        self.width = int(width)
        self.height = int(height)

    def text_to_image(self, prompt: str, seed: int):
        return procedural_image(seed_from_text(prompt, seed), self.width, self.height)
