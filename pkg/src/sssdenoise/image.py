"""Grayscale raster type and 8-bit file I/O.

Intensities live in ``[0, 1]`` in memory; quantization to bytes happens
only when writing files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class PGMError(ValueError):
    """Base class for malformed-PGM errors."""


class WrongMagicError(PGMError):
    pass


class BadMaxvalError(PGMError):
    pass


class TruncatedPayloadError(PGMError):
    pass


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable grayscale image backed by a read-only ``(height, width)`` array."""

    pixels: np.ndarray

    def __post_init__(self):
        a = np.array(self.pixels, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.size == 0:
            raise ValueError(f"expected a nonempty 2-D array, got shape {a.shape}")
        if not np.all((a >= 0) & (a <= 1)):
            raise ValueError("intensities must lie in [0, 1]")
        a.setflags(write=False)
        object.__setattr__(self, "pixels", a)

    @classmethod
    def from_flat(cls, width, height, data):
        data = np.asarray(data, dtype=np.float64)
        if data.size != width * height:
            raise ValueError(f"{data.size} values for a {width}x{height} image")
        return cls(data.reshape(height, width))

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def shape(self):
        return self.pixels.shape

    @property
    def data(self):
        """Row-major flat view of the intensities."""
        return self.pixels.ravel()

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    __hash__ = None

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


def clip_image(a):
    """Build a GrayImage from an arbitrary real array, clamping to [0, 1]."""
    return GrayImage(np.clip(np.asarray(a, dtype=np.float64), 0.0, 1.0))


def quantize(img):
    """8-bit bytes with round-half-away-from-zero (values are nonnegative)."""
    return np.floor(img.pixels * 255.0 + 0.5).astype(np.uint8)


def _read_token(buf, pos):
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise TruncatedPayloadError("header ended early")
    return buf[start:pos], pos


def load_pgm(path):
    """Read a binary (P5) PGM with ``maxval <= 255``."""
    buf = Path(path).read_bytes()
    if buf[:2] != b"P5":
        raise WrongMagicError(f"{path}: expected P5 magic, got {buf[:2]!r}")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _read_token(buf, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise PGMError(f"{path}: bad header field {tok!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PGMError(f"{path}: bad dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise BadMaxvalError(f"{path}: maxval {maxval} not in 1..255")
    pos += 1  # single whitespace byte after maxval
    payload = buf[pos:pos + width * height]
    if len(payload) < width * height:
        raise TruncatedPayloadError(
            f"{path}: expected {width * height} pixel bytes, found {len(payload)}")
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return GrayImage(np.minimum(raw / maxval, 1.0))


def save_pgm(img, path):
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(quantize(img).tobytes())


def load_image(path):
    """Load a PGM, or an 8-bit PNG via Pillow (converted to grayscale)."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        with Image.open(path) as im:
            return GrayImage(np.asarray(im.convert("L"), dtype=np.float64) / 255.0)
    return load_pgm(path)


def save_image(img, path):
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        Image.fromarray(quantize(img), mode="L").save(path)
    else:
        save_pgm(img, path)


def crop(img, x, y, w, h):
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise IndexError(f"crop ({x},{y},{w},{h}) outside {img.width}x{img.height} image")
    return GrayImage(img.pixels[y:y + h, x:x + w])


def pad_reflect(img, multiple):
    """Mirror-pad right/bottom so both dims are multiples of ``multiple``.

    Returns ``(padded, (width, height))`` where the tuple holds the
    original dimensions for :func:`unpad`.
    """
    if multiple < 1:
        raise ValueError("multiple must be >= 1")
    h, w = img.shape
    ph = -h % multiple
    pw = -w % multiple
    a = img.pixels
    if ph or pw:
        # numpy's reflect mode is undefined on length-1 axes; edge is the
        # only mirror image there
        mode_h = "reflect" if h > 1 else "edge"
        mode_w = "reflect" if w > 1 else "edge"
        a = np.pad(a, ((0, ph), (0, 0)), mode=mode_h)
        a = np.pad(a, ((0, 0), (0, pw)), mode=mode_w)
    return GrayImage(a), (w, h)


def unpad(img, dims):
    w, h = dims
    return crop(img, 0, 0, w, h)


def sonar_scene(size=256, seed=0):
    """Procedural side-scan-like test scene (noise free).

    Bright sediment ripples fading with range, a hull-shaped strong return
    with an acoustic shadow behind it, and a few boulders. Smooth enough to
    serve as a clean reference for synthetic corruption.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / float(size)
    # range-dependent backscatter falloff across track
    base = 0.55 - 0.25 * xx
    angle = rng.uniform(0.2, 0.6)
    ripples = 0.08 * np.sin(2 * np.pi * 9 * (xx * np.cos(angle) + yy * np.sin(angle)))
    swell = 0.05 * np.sin(2 * np.pi * 2.3 * yy + 1.1) * np.cos(2 * np.pi * 1.7 * xx)
    a = base + ripples + swell

    # hull: rotated ellipse with a bright rim
    cx, cy = rng.uniform(0.4, 0.55), rng.uniform(0.4, 0.6)
    theta = rng.uniform(-0.6, 0.6)
    u = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
    v = -(xx - cx) * np.sin(theta) + (yy - cy) * np.cos(theta)
    r = (u / 0.09) ** 2 + (v / 0.3) ** 2
    hull = r < 1
    shadow = (u > 0) & (u < 0.28) & ((v / 0.3) ** 2 < 1) & ~hull
    a = np.where(shadow, 0.08 + 0.04 * xx, a)
    a = np.where(hull, 0.7 + 0.2 * (1 - r), a)

    for _ in range(6):
        bx, by = rng.uniform(0.05, 0.95, size=2)
        br = rng.uniform(0.015, 0.035)
        d2 = (xx - bx) ** 2 + (yy - by) ** 2
        a = np.where(d2 < br**2, 0.85, a)
    return clip_image(a)
