import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sssdenoise.image import (
    BadMaxvalError,
    GrayImage,
    TruncatedPayloadError,
    WrongMagicError,
    crop,
    load_image,
    load_pgm,
    pad_reflect,
    quantize,
    save_image,
    save_pgm,
    sonar_scene,
    unpad,
)

images = arrays(
    np.float64,
    st.tuples(st.integers(1, 12), st.integers(1, 12)),
    elements=st.floats(0, 1),
).map(GrayImage)


def ramp(w, h):
    return GrayImage(np.arange(w * h, dtype=float).reshape(h, w) / (w * h - 1))


class TestGrayImage:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            GrayImage(np.array([[1.5]]))
        with pytest.raises(ValueError):
            GrayImage(np.array([[-0.1]]))

    def test_from_flat_checks_length(self):
        img = GrayImage.from_flat(3, 2, [0, 0.1, 0.2, 0.3, 0.4, 0.5])
        assert (img.width, img.height) == (3, 2)
        assert img.pixels[1, 0] == 0.3
        with pytest.raises(ValueError):
            GrayImage.from_flat(3, 2, [0.0] * 5)

    def test_pixels_read_only(self):
        img = ramp(4, 4)
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 1.0


class TestPGM:
    def test_single_white_pixel(self, tmp_path):
        p = tmp_path / "one.pgm"
        p.write_bytes(b"P5\n1 1\n255\n\xff")
        img = load_pgm(p)
        assert (img.width, img.height) == (1, 1)
        assert img.data.tolist() == [1.0]

    def test_maxval_scaling_and_comments(self, tmp_path):
        p = tmp_path / "c.pgm"
        p.write_bytes(b"P5 # comment\n2 1\n# another\n15\n\x00\x05")
        assert load_pgm(p).data.tolist() == [0.0, 5 / 15]

    @pytest.mark.parametrize(
        "payload,err",
        [
            (b"P2\n1 1\n255\n0", WrongMagicError),
            (b"P5\n1 1\n0\n\x00", BadMaxvalError),
            (b"P5\n1 1\n256\n\x00", BadMaxvalError),
            (b"P5\n2 2\n255\n\x00\x00\x00", TruncatedPayloadError),
        ],
    )
    def test_errors(self, tmp_path, payload, err):
        p = tmp_path / "bad.pgm"
        p.write_bytes(payload)
        with pytest.raises(err):
            load_pgm(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_pgm(tmp_path / "nope.pgm")

    def test_half_rounds_away_from_zero(self, tmp_path):
        p = tmp_path / "h.pgm"
        save_pgm(GrayImage(np.array([[0.5, 0.0, 1.0]])), p)
        assert p.read_bytes()[-3:] == bytes([128, 0, 255])

    def test_header_layout(self, tmp_path):
        p = tmp_path / "h.pgm"
        save_pgm(ramp(2, 3), p)
        raw = p.read_bytes()
        assert raw.startswith(b"P5\n2 3\n255\n")
        assert len(raw) == len(b"P5\n2 3\n255\n") + 6

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(OSError):
            save_pgm(ramp(2, 2), tmp_path / "missing-dir" / "x.pgm")

    @settings(max_examples=40, deadline=None)
    @given(images)
    def test_roundtrip_is_bit_exact(self, tmp_path_factory, img):
        d = tmp_path_factory.mktemp("rt")
        save_pgm(img, d / "a.pgm")
        back = load_pgm(d / "a.pgm")
        assert np.array_equal(back.pixels, quantize(img) / 255.0)
        save_pgm(back, d / "b.pgm")
        assert (d / "a.pgm").read_bytes() == (d / "b.pgm").read_bytes()

    def test_png_convenience(self, tmp_path):
        img = sonar_scene(32)
        save_image(img, tmp_path / "s.png")
        assert np.array_equal(load_image(tmp_path / "s.png").pixels, quantize(img) / 255.0)


class TestCrop:
    def test_full_frame_identity(self):
        img = ramp(5, 3)
        assert crop(img, 0, 0, 5, 3) == img

    def test_interior_of_ramp(self):
        img = ramp(4, 4)
        # rows 1..2, cols 1..2 of 0..15
        expected = np.array([5, 6, 9, 10]) / 15
        assert np.allclose(crop(img, 1, 1, 2, 2).data, expected)

    def test_out_of_bounds(self):
        with pytest.raises(IndexError):
            crop(ramp(4, 4), 3, 0, 2, 1)

    @given(st.data())
    def test_crops_compose(self, data):
        img = ramp(9, 7)
        x = data.draw(st.integers(0, 8))
        y = data.draw(st.integers(0, 6))
        w = data.draw(st.integers(1, 9 - x))
        h = data.draw(st.integers(1, 7 - y))
        x2 = data.draw(st.integers(0, w - 1))
        y2 = data.draw(st.integers(0, h - 1))
        w2 = data.draw(st.integers(1, w - x2))
        h2 = data.draw(st.integers(1, h - y2))
        assert crop(crop(img, x, y, w, h), x2, y2, w2, h2) == crop(img, x + x2, y + y2, w2, h2)


class TestPadReflect:
    def test_aligned_passthrough(self):
        img = sonar_scene(64)
        padded, dims = pad_reflect(img, 32)
        assert padded == img and dims == (64, 64)

    def test_mirror_columns(self):
        img = GrayImage(np.random.default_rng(0).random((32, 33)))
        padded, dims = pad_reflect(img, 32)
        assert padded.shape == (32, 64) and dims == (33, 32)
        for c in range(33, 64):
            # mirror about the last original column (index 32), edge not repeated
            assert np.array_equal(padded.pixels[:, c], img.pixels[:, 64 - c])

    def test_single_pixel(self):
        padded, _ = pad_reflect(GrayImage(np.array([[0.3]])), 2)
        assert padded.shape == (2, 2)
        assert np.all(padded.pixels == 0.3)

    @given(images, st.integers(1, 8))
    def test_unpad_inverts(self, img, multiple):
        padded, dims = pad_reflect(img, multiple)
        assert padded.width % multiple == 0 and padded.height % multiple == 0
        assert unpad(padded, dims) == img
