import numpy as np
import pytest

from panoweave.fileio import (
    decode_mask_png_bytes,
    decode_pfm_bytes,
    decode_png_bytes,
    encode_mask_png_bytes,
    encode_pfm_bytes,
    encode_png_bytes,
    load_png,
    read_ply,
    save_png,
    write_ply,
)
from panoweave.imageops import to_uint8
from panoweave.synthetic import procedural_image


class TestPng:
    def test_round_trip_quantized(self):
        img = procedural_image(0, 32, 24)
        out = decode_png_bytes(encode_png_bytes(img))
        assert out.shape == (24, 32, 3) and out.dtype == np.float32
        assert np.array_equal(to_uint8(out), to_uint8(img))

    def test_uint8_lossless(self):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
        out = decode_png_bytes(encode_png_bytes(img))
        assert np.array_equal(to_uint8(out), img)

    def test_file_round_trip(self, tmp_path):
        img = procedural_image(2, 16, 16)
        save_png(tmp_path / "a.png", img)
        out = load_png(tmp_path / "a.png")
        assert np.array_equal(to_uint8(out), to_uint8(img))

    def test_deterministic_bytes(self):
        img = procedural_image(3, 16, 16)
        assert encode_png_bytes(img) == encode_png_bytes(img.copy())

    def test_mask_round_trip(self):
        rng = np.random.default_rng(4)
        mask = rng.random((20, 30)) > 0.5
        assert np.array_equal(decode_mask_png_bytes(encode_mask_png_bytes(mask)), mask)


class TestPfm:
    def test_round_trip_exact(self):
        rng = np.random.default_rng(5)
        depth = rng.uniform(0.1, 50.0, (17, 23)).astype(np.float32)
        out = decode_pfm_bytes(encode_pfm_bytes(depth))
        assert np.array_equal(out, depth)

    def test_header_fields(self):
        data = encode_pfm_bytes(np.ones((4, 6), np.float32))
        assert data.startswith(b"Pf\n6 4\n-1.0\n")

    def test_scanlines_bottom_up(self):
        depth = np.arange(6, dtype=np.float32).reshape(3, 2)
        data = encode_pfm_bytes(depth)
        body = np.frombuffer(data.split(b"-1.0\n", 1)[1], dtype="<f4")
        assert list(body[:2]) == [4.0, 5.0]

    def test_bad_magic_rejected(self):
        with pytest.raises(ValueError):
            decode_pfm_bytes(b"PF\n2 2\n-1.0\n" + b"\x00" * 48)


class TestPly:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        pts = rng.normal(0, 3, (100, 3)).astype(np.float32)
        col = rng.uniform(0, 1, (100, 3)).astype(np.float32)
        path = tmp_path / "cloud.ply"
        write_ply(path, pts, col)
        rpts, rcol = read_ply(path)
        assert np.array_equal(rpts, pts)
        assert np.array_equal(rcol, to_uint8(col))

    def test_header_format(self, tmp_path):
        path = tmp_path / "c.ply"
        write_ply(path, np.zeros((2, 3)), np.zeros((2, 3)))
        head = path.read_bytes()[:200].decode("ascii")
        assert head.startswith("ply\nformat binary_little_endian 1.0\nelement vertex 2\n")
        for prop in ["property float x", "property float y", "property float z",
                     "property uchar red", "property uchar green", "property uchar blue"]:
            assert prop in head

    def test_record_layout(self, tmp_path):
        path = tmp_path / "c.ply"
        write_ply(path, np.array([[1.0, 2.0, 3.0]]), np.array([[10, 20, 30]], np.uint8))
        data = path.read_bytes()
        body = data[data.index(b"end_header\n") + 11 :]
        assert len(body) == 15
        assert np.frombuffer(body[:12], "<f4").tolist() == [1.0, 2.0, 3.0]
        assert list(body[12:]) == [10, 20, 30]

    def test_shape_validation(self, tmp_path):
        with pytest.raises(ValueError):
            write_ply(tmp_path / "x.ply", np.zeros((2, 2)), np.zeros((2, 2)))
