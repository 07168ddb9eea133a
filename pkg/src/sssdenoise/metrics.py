"""Image quality indexes: MSE, PSNR, SSIM, flowing index (FI) and edge
preservation index (EPI).

Undefined results (zero MSE, constant images) raise subclasses of
:class:`MetricError` rather than returning ``inf``/``nan``, so callers can
annotate them explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .image import GrayImage


class MetricError(ValueError):
    annotation = "undefined"


class IdenticalImages(MetricError):
    """PSNR of two identical images (MSE is zero)."""

    annotation = "identical"


class UndefinedMetric(MetricError):
    """A ratio metric whose denominator vanished."""

    annotation = "undefined"


def _arr(a):
    # raw arrays are accepted so 8-bit-domain data can be scored with peak=255
    return a.pixels if isinstance(a, GrayImage) else np.asarray(a, dtype=np.float64)


def _pair(a, b):
    x, y = _arr(a), _arr(b)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return x, y


def mse(a: GrayImage, b: GrayImage) -> float:
    x, y = _pair(a, b)
    return float(np.mean((x - y) ** 2))


def psnr(a: GrayImage, b: GrayImage, peak: float = 1.0) -> float:
    if peak <= 0:
        raise ValueError("peak must be positive")
    err = mse(a, b)
    if err == 0:
        raise IdenticalImages("images are identical; PSNR is unbounded")
    return 10.0 * math.log10(peak**2 / err)


@dataclass(frozen=True)
class SSIMConfig:
    window: int = 11
    window_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    peak: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("SSIM window must be odd and >= 3")
        if self.peak <= 0 or self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("peak, k1 and k2 must be positive")

    def kernel(self):
        off = np.arange(self.window) - self.window // 2
        g = np.exp(-(off**2) / (2 * self.window_sigma**2))
        g = np.outer(g, g)
        return g / g.sum()


def ssim_map(a: GrayImage, b: GrayImage, cfg: SSIMConfig = SSIMConfig()) -> np.ndarray:
    """Local SSIM at every position where the full window fits."""
    x, y = _pair(a, b)
    n = cfg.window
    if x.shape[0] < n or x.shape[1] < n:
        raise ValueError(f"image {x.shape} smaller than the {n}x{n} SSIM window")
    w = cfg.kernel()

    def filt(z):
        return np.einsum("hwij,ij->hw", sliding_window_view(z, (n, n)), w)

    mx, my = filt(x), filt(y)
    vx = np.maximum(filt(x * x) - mx**2, 0.0)
    vy = np.maximum(filt(y * y) - my**2, 0.0)
    cxy = filt(x * y) - mx * my
    sx, sy = np.sqrt(vx), np.sqrt(vy)
    c1 = (cfg.k1 * cfg.peak) ** 2
    c2 = (cfg.k2 * cfg.peak) ** 2
    c3 = c2 / 2
    lum = (2 * mx * my + c1) / (mx**2 + my**2 + c1)
    con = (2 * sx * sy + c2) / (vx + vy + c2)
    struct = (cxy + c3) / (sx * sy + c3)
    if cfg.alpha == cfg.beta == cfg.gamma == 1:
        return lum * con * struct
    return lum**cfg.alpha * con**cfg.beta * np.sign(struct) * np.abs(struct) ** cfg.gamma


def ssim(a: GrayImage, b: GrayImage, cfg: SSIMConfig = SSIMConfig()) -> float:
    return float(ssim_map(a, b, cfg).mean())


def fi(img: GrayImage) -> float:
    """Mean over population standard deviation."""
    a = _arr(img)
    sd = float(a.std())
    if sd == 0:
        raise UndefinedMetric("constant image has zero standard deviation")
    return float(a.mean()) / sd


def edge_activity(a: np.ndarray) -> float:
    """Sum of absolute differences over right, down, down-right and
    down-left neighbor pairs, each unordered pair counted once."""
    return float(
        np.abs(a[:, 1:] - a[:, :-1]).sum()
        + np.abs(a[1:, :] - a[:-1, :]).sum()
        + np.abs(a[1:, 1:] - a[:-1, :-1]).sum()
        + np.abs(a[1:, :-1] - a[:-1, 1:]).sum()
    )


def epi(denoised: GrayImage, raw: GrayImage) -> float:
    d, r = _pair(denoised, raw)
    den = edge_activity(r)
    if den == 0:
        raise UndefinedMetric("raw image has no edges (constant)")
    return edge_activity(d) / den


@dataclass
class MetricReport:
    """One table row worth of indexes.

    Each field holds a float, or a string annotation (``"identical"``,
    ``"undefined"``, ``"n/a"``) when the value does not exist.
    """

    psnr: float | str = "n/a"
    ssim: float | str = "n/a"
    fi: float | str = "n/a"
    epi: float | str = "n/a"

    FIELDS = ("psnr", "ssim", "fi", "epi")

    def values(self):
        return [getattr(self, f) for f in self.FIELDS]


def _guard(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except MetricError as e:
        return e.annotation


def evaluate(output: GrayImage, raw: GrayImage, clean: GrayImage | None = None,
             ssim_cfg: SSIMConfig | None = None) -> MetricReport:
    """Score ``output``: PSNR/SSIM against ``clean`` when one exists, FI on
    the output, EPI relative to the ``raw`` (noisy) input."""
    rep = MetricReport()
    if clean is not None:
        rep.psnr = _guard(psnr, output, clean)
        rep.ssim = ssim(output, clean, ssim_cfg or SSIMConfig())
    rep.fi = _guard(fi, output)
    rep.epi = _guard(epi, output, raw)
    return rep
