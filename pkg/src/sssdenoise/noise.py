"""Seeded synthetic corruption for the Gaussian, salt-and-pepper and speckle families.

All generators draw from numpy's ``default_rng(seed)`` (PCG64), so a given
``(image, parameter, seed)`` triple always yields the same output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import GrayImage, clip_image

KINDS = ("gaussian", "saltpepper", "speckle")


def add_gaussian(img: GrayImage, sigma: float, seed: int) -> GrayImage:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return img
    rng = np.random.default_rng(seed)
    return clip_image(img.pixels + rng.normal(0.0, sigma, size=img.shape))


def add_salt_pepper(img: GrayImage, density: float, seed: int) -> GrayImage:
    if not 0 <= density <= 1:
        raise ValueError("density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    hit = rng.random(img.shape) < density
    salt = rng.random(img.shape) < 0.5
    return GrayImage(np.where(hit, salt.astype(np.float64), img.pixels))


def add_speckle(img: GrayImage, sigma: float, seed: int) -> GrayImage:
    """Multiplicative Gaussian speckle ``x * (1 + n)``."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return img
    rng = np.random.default_rng(seed)
    return clip_image(img.pixels * (1.0 + rng.normal(0.0, sigma, size=img.shape)))


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    level: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {KINDS}")
        if self.level < 0 or (self.kind == "saltpepper" and self.level > 1):
            raise ValueError(f"bad {self.kind} level {self.level}")

    @classmethod
    def parse(cls, text, seed=0):
        """Parse ``gaussian:0.1``, ``saltpepper:0.05`` or ``speckle:0.2``."""
        kind, sep, level = text.partition(":")
        kind = kind.strip().lower().replace("-", "").replace("_", "")
        if kind in ("sp", "saltandpepper", "peppersalt"):
            kind = "saltpepper"
        if not sep:
            raise ValueError(f"noise spec {text!r} needs the form kind:level")
        return cls(kind, float(level), seed)

    def apply(self, img):
        fn = {"gaussian": add_gaussian, "saltpepper": add_salt_pepper,
              "speckle": add_speckle}[self.kind]
        return fn(img, self.level, self.seed)

    def __str__(self):
        return f"{self.kind}:{self.level:g}"
