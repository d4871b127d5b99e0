"""File and wire codecs: PNG, PFM depth maps, binary PLY point clouds.

Wire images are lossless 8-bit RGB PNG (base64 inside JSON); depth crosses
the wire as PFM ("Pf", negative scale header = little-endian float32,
scanlines bottom-to-top). Point clouds are binary little-endian PLY with
float32 positions and uint8 colors.
"""

from __future__ import annotations

import base64
import io
from pathlib import Path

import numpy as np
from PIL import Image

from panoweave.imageops import to_float, to_uint8


# ---------------------------------------------------------------------------
# PNG

def encode_png_bytes(img: np.ndarray) -> bytes:
    """Float [0,1] or uint8 RGB image to PNG bytes (lossless; fast deflate)."""
    arr = to_uint8(img) if img.dtype != np.uint8 else img
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB" if arr.ndim == 3 else "L").save(
        buf, format="PNG", compress_level=1
    )
    return buf.getvalue()


def decode_png_bytes(data: bytes) -> np.ndarray:
    """PNG bytes to float32 RGB in [0,1]."""
    img = Image.open(io.BytesIO(data)).convert("RGB")
    return to_float(np.asarray(img))


def encode_mask_png_bytes(mask: np.ndarray) -> bytes:
    """Boolean mask to grayscale PNG (255 = needs inpainting)."""
    arr = np.where(np.asarray(mask, bool), 255, 0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def decode_mask_png_bytes(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data)).convert("L")
    return np.asarray(img) > 127


def save_png(path, img: np.ndarray):
    Path(path).write_bytes(encode_png_bytes(img))


def load_png(path) -> np.ndarray:
    return decode_png_bytes(Path(path).read_bytes())


def save_mask_png(path, mask: np.ndarray):
    Path(path).write_bytes(encode_mask_png_bytes(mask))


def load_mask_png(path) -> np.ndarray:
    return decode_mask_png_bytes(Path(path).read_bytes())


def b64_of(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def bytes_of_b64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


# ---------------------------------------------------------------------------
# PFM

def encode_pfm_bytes(depth: np.ndarray) -> bytes:
    """Single-channel float32 raster to PFM (grayscale, little-endian)."""
    d = np.asarray(depth, dtype="<f4")
    if d.ndim != 2:
        raise ValueError(f"PFM encoder expects a 2D array, got shape {d.shape}")
    header = f"Pf\n{d.shape[1]} {d.shape[0]}\n-1.0\n".encode("ascii")
    return header + d[::-1].tobytes()


def decode_pfm_bytes(data: bytes) -> np.ndarray:
    stream = io.BytesIO(data)

    def token():
        out = b""
        ch = stream.read(1)
        while ch.isspace():
            ch = stream.read(1)
        while ch and not ch.isspace():
            out += ch
            ch = stream.read(1)
        return out

    magic = token()
    if magic != b"Pf":
        raise ValueError(f"not a grayscale PFM (magic {magic!r})")
    width = int(token())
    height = int(token())
    scale = float(token())
    dtype = "<f4" if scale < 0 else ">f4"
    body = stream.read(width * height * 4)
    if len(body) != width * height * 4:
        raise ValueError("truncated PFM payload")
    d = np.frombuffer(body, dtype=dtype).reshape(height, width)
    return np.ascontiguousarray(d[::-1]).astype(np.float32)


def save_pfm(path, depth: np.ndarray):
    Path(path).write_bytes(encode_pfm_bytes(depth))


def load_pfm(path) -> np.ndarray:
    return decode_pfm_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# PLY

_PLY_DTYPE = np.dtype(
    [("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("red", "u1"), ("green", "u1"), ("blue", "u1")]
)


def write_ply(path, points: np.ndarray, colors: np.ndarray):
    """Binary little-endian PLY; colors may be float [0,1] or uint8."""
    pts = np.asarray(points, dtype=np.float32)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must be (N, 3), got {pts.shape}")
    col = np.asarray(colors)
    if col.shape != pts.shape:
        raise ValueError(f"colors shape {col.shape} must match points {pts.shape}")
    if col.dtype != np.uint8:
        col = to_uint8(col)
    rec = np.empty(len(pts), dtype=_PLY_DTYPE)
    rec["x"], rec["y"], rec["z"] = pts[:, 0], pts[:, 1], pts[:, 2]
    rec["red"], rec["green"], rec["blue"] = col[:, 0], col[:, 1], col[:, 2]
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {len(pts)}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        "property uchar red\n"
        "property uchar green\n"
        "property uchar blue\n"
        "end_header\n"
    )
    Path(path).write_bytes(header.encode("ascii") + rec.tobytes())


def read_ply(path):
    """Read back a PLY written by write_ply; returns (points f32, colors u8)."""
    data = Path(path).read_bytes()
    end = data.index(b"end_header\n") + len(b"end_header\n")
    header = data[:end].decode("ascii").splitlines()
    if "format binary_little_endian 1.0" not in header:
        raise ValueError("unsupported PLY format")
    count = next(int(line.split()[-1]) for line in header if line.startswith("element vertex"))
    rec = np.frombuffer(data[end:], dtype=_PLY_DTYPE, count=count)
    pts = np.column_stack([rec["x"], rec["y"], rec["z"]]).astype(np.float32)
    col = np.column_stack([rec["red"], rec["green"], rec["blue"]])
    return pts, col
