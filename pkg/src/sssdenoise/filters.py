"""Classical baseline denoisers: mean, median, bilateral and local Wiener.

All filters pad with replicated edge pixels and preserve image size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .image import GrayImage, clip_image


def _check_window(k):
    if k < 1 or k % 2 == 0:
        raise ValueError(f"window side must be odd and >= 1, got {k}")


def _windows(a, k):
    """``(H, W, k, k)`` view of replicate-padded neighborhoods."""
    r = k // 2
    return sliding_window_view(np.pad(a, r, mode="edge"), (k, k))


def mean_filter(img: GrayImage, k: int = 3) -> GrayImage:
    _check_window(k)
    if k == 1:
        return img
    return clip_image(_windows(img.pixels, k).mean(axis=(2, 3)))


def median_filter(img: GrayImage, k: int = 3) -> GrayImage:
    _check_window(k)
    if k == 1:
        return img
    return GrayImage(np.median(_windows(img.pixels, k), axis=(2, 3)))


def gaussian_blur(img: GrayImage, radius: int, sigma: float) -> GrayImage:
    """Truncated, normalized Gaussian blur over a ``(2r+1)^2`` window."""
    off = np.arange(-radius, radius + 1)
    g = np.exp(-(off[:, None] ** 2 + off[None, :] ** 2) / (2 * sigma**2))
    g /= g.sum()
    win = _windows(img.pixels, 2 * radius + 1)
    return clip_image(np.einsum("hwij,ij->hw", win, g))


def bilateral_filter(img: GrayImage, radius: int = 2, sigma_space: float = 2.0,
                     sigma_range: float = 0.1) -> GrayImage:
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if sigma_space <= 0 or sigma_range <= 0:
        raise ValueError("sigmas must be positive")
    a = img.pixels
    off = np.arange(-radius, radius + 1)
    spatial = np.exp(-(off[:, None] ** 2 + off[None, :] ** 2) / (2 * sigma_space**2))
    win = _windows(a, 2 * radius + 1)
    rng_w = np.exp(-((win - a[:, :, None, None]) ** 2) / (2 * sigma_range**2))
    w = spatial * rng_w
    return clip_image((w * win).sum(axis=(2, 3)) / w.sum(axis=(2, 3)))


def wiener_filter(img: GrayImage, k: int = 3) -> GrayImage:
    """Locally adaptive Wiener filter.

    The noise power is estimated as the image-wide average of the local
    variances. Where local variance is far above it the pixel passes
    through; flat regions collapse to the local mean.
    """
    _check_window(k)
    a = img.pixels
    win = _windows(a, k)
    mu = win.mean(axis=(2, 3))
    var = (win**2).mean(axis=(2, 3)) - mu**2
    var = np.maximum(var, 0.0)
    noise = var.mean()
    denom = np.maximum(var, noise)
    with np.errstate(invalid="ignore", divide="ignore"):
        gain = np.where(denom > 0, np.maximum(var - noise, 0.0) / denom, 0.0)
    return clip_image(mu + gain * (a - mu))


@dataclass(frozen=True)
class FilterSpec:
    """One baseline filter with its parameters, e.g. ``median:3``."""

    kind: str
    params: tuple = ()

    DEFAULTS = {
        "mean": (3,),
        "median": (3,),
        "bilateral": (2, 2.0, 0.1),
        "wiener": (3,),
        "identity": (),
    }

    def __post_init__(self):
        if self.kind not in self.DEFAULTS:
            raise ValueError(f"unknown filter {self.kind!r}")
        params = tuple(self.params) or self.DEFAULTS[self.kind]
        if len(params) != len(self.DEFAULTS[self.kind]):
            raise ValueError(f"{self.kind} takes {len(self.DEFAULTS[self.kind])} parameter(s)")
        if self.kind == "bilateral":
            params = (int(params[0]), float(params[1]), float(params[2]))
            if params[0] < 1 or params[1] <= 0 or params[2] <= 0:
                raise ValueError(f"bad bilateral parameters {params}")
        elif params:
            params = (int(params[0]),)
            _check_window(params[0])
        object.__setattr__(self, "params", params)

    @classmethod
    def parse(cls, text):
        kind, _, rest = text.strip().partition(":")
        kind = kind.lower()
        params = tuple(float(v) for v in rest.split(",")) if rest else ()
        return cls(kind, params)

    @property
    def name(self):
        if not self.params:
            return self.kind
        return self.kind + ":" + ",".join(f"{p:g}" for p in self.params)

    def apply(self, img):
        if self.kind == "identity":
            return img
        fn = {"mean": mean_filter, "median": median_filter,
              "bilateral": bilateral_filter, "wiener": wiener_filter}[self.kind]
        return fn(img, *self.params)
