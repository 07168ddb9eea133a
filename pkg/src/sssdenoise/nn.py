"""Minimal layer stack with hand-written backward passes.

Activations are plain numpy arrays shaped ``(channels, height, width)``;
the batch dimension is always one. Every layer caches what its backward
pass needs during ``forward`` and accumulates parameter gradients into
:class:`Parameter.grad` during ``backward``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    """Raised at layer entry when operand shapes are incompatible."""


@dataclass
class Parameter:
    value: np.ndarray
    grad: np.ndarray = field(init=False)

    def __post_init__(self):
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0

    def astype(self, dtype):
        self.value = self.value.astype(dtype)
        self.grad = np.zeros_like(self.value)


def kaiming_uniform(rng, shape, negative_slope=0.0, dtype=np.float32):
    """Fan-in Kaiming-uniform init for a ``(out, in, kh, kw)`` kernel."""
    fan_in = int(np.prod(shape[1:]))
    gain = math.sqrt(2.0 / (1.0 + negative_slope**2))
    bound = gain * math.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def _im2col(x, k, pad):
    """Unfold ``x`` (C, H, W) into ``(C*k*k, H_out*W_out)`` columns."""
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    c = x.shape[0]
    win = sliding_window_view(x, (k, k), axis=(1, 2))  # C, Ho, Wo, k, k
    ho, wo = win.shape[1], win.shape[2]
    cols = win.transpose(0, 3, 4, 1, 2).reshape(c * k * k, ho * wo)
    return cols, ho, wo


def _col2im(dcols, shape, k, pad, ho, wo):
    """Adjoint of :func:`_im2col`; returns the gradient w.r.t. the unpadded input."""
    c, h, w = shape
    dpad = np.zeros((c, h + 2 * pad, w + 2 * pad), dtype=dcols.dtype)
    d = dcols.reshape(c, k, k, ho, wo)
    for dy in range(k):
        for dx in range(k):
            dpad[:, dy:dy + ho, dx:dx + wo] += d[:, dy, dx]
    if pad:
        return dpad[:, pad:pad + h, pad:pad + w]
    return dpad


class Conv2d:
    """Zero-padded, stride-1 cross-correlation."""

    def __init__(self, in_ch, out_ch, k=3, pad=None, rng=None,
                 negative_slope=0.0, dtype=np.float32):
        self.in_ch, self.out_ch, self.k = in_ch, out_ch, k
        self.pad = k // 2 if pad is None else pad
        rng = np.random.default_rng(0) if rng is None else rng
        self.weight = Parameter(kaiming_uniform(rng, (out_ch, in_ch, k, k),
                                                negative_slope, dtype))
        self.bias = Parameter(np.zeros(out_ch, dtype=dtype))
        self._cache = None

    def parameters(self):
        return [self.weight, self.bias]

    def _check(self, x):
        if x.ndim != 3 or x.shape[0] != self.in_ch:
            raise ShapeError(f"expected ({self.in_ch}, H, W) input, got {x.shape}")
        h, w = x.shape[1:]
        if h + 2 * self.pad < self.k or w + 2 * self.pad < self.k:
            raise ShapeError(f"input {x.shape} smaller than kernel {self.k}")

    def forward(self, x):
        self._check(x)
        cols, ho, wo = _im2col(x, self.k, self.pad)
        wmat = self.weight.value.reshape(self.out_ch, -1)
        out = wmat @ cols + self.bias.value[:, None]
        self._cache = (x.shape, cols, ho, wo)
        return out.reshape(self.out_ch, ho, wo)

    def backward(self, grad):
        shape, cols, ho, wo = self._cache
        g = grad.reshape(self.out_ch, ho * wo)
        wmat = self.weight.value.reshape(self.out_ch, -1)
        self.weight.grad += (g @ cols.T).reshape(self.weight.shape)
        self.bias.grad += g.sum(axis=1)
        return _col2im(wmat.T @ g, shape, self.k, self.pad, ho, wo)


class PartialConv2d(Conv2d):
    """Mask-aware convolution.

    Only pixels with mask 1 contribute; each window's response is rescaled
    by ``k*k / (number of valid pixels in the window)``. Windows with no
    valid pixel output the bias alone. Zero padding counts as invalid.
    """

    def forward(self, x, mask):
        self._check(x)
        if mask.shape != (1,) + x.shape[1:]:
            raise ShapeError(f"mask shape {mask.shape} does not match input {x.shape}")
        if not np.all((mask == 0) | (mask == 1)):
            raise ValueError("mask must be binary")
        k, pad = self.k, self.pad
        mpad = np.pad(mask[0], pad) if pad else mask[0]
        valid = sliding_window_view(mpad, (k, k)).sum(axis=(2, 3))
        hit = valid > 0
        scale = np.zeros_like(valid, dtype=x.dtype)
        scale[hit] = (k * k) / valid[hit]
        xm = x * mask
        cols, ho, wo = _im2col(xm, k, pad)
        wmat = self.weight.value.reshape(self.out_ch, -1)
        s = scale.reshape(1, ho * wo)
        out = (wmat @ cols) * s + self.bias.value[:, None]
        self._cache = (x.shape, cols, ho, wo, s, mask)
        new_mask = hit.astype(x.dtype)[None]
        return out.reshape(self.out_ch, ho, wo), new_mask

    def backward(self, grad):
        shape, cols, ho, wo, s, mask = self._cache
        g = grad.reshape(self.out_ch, ho * wo)
        graw = g * s
        wmat = self.weight.value.reshape(self.out_ch, -1)
        self.weight.grad += (graw @ cols.T).reshape(self.weight.shape)
        self.bias.grad += g.sum(axis=1)
        return _col2im(wmat.T @ graw, shape, self.k, self.pad, ho, wo) * mask


class LeakyReLU:
    def __init__(self, alpha=0.1):
        if not 0 < alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        self.alpha = alpha
        self._pos = None

    def forward(self, x):
        self._pos = x > 0
        return np.where(self._pos, x, self.alpha * x)

    def backward(self, grad):
        return np.where(self._pos, grad, self.alpha * grad)


class MaxPool2d:
    """2x2 stride-2 max pooling; ties go to the first cell in row-major order."""

    def __init__(self):
        self._cache = None

    @staticmethod
    def _blocks(x):
        c, h, w = x.shape
        if h % 2 or w % 2:
            raise ShapeError(f"maxpool needs even spatial dims, got {x.shape}")
        # (C, H/2, W/2, 4) with the 4 cells in row-major order
        return x.reshape(c, h // 2, 2, w // 2, 2).transpose(0, 1, 3, 2, 4).reshape(
            c, h // 2, w // 2, 4)

    def forward(self, x):
        blocks = self._blocks(x)
        idx = blocks.argmax(axis=-1)
        self._cache = (x.shape, idx)
        return np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        shape, idx = self._cache
        c, h, w = shape
        gb = np.zeros((c, h // 2, w // 2, 4), dtype=grad.dtype)
        np.put_along_axis(gb, idx[..., None], grad[..., None], axis=-1)
        return gb.reshape(c, h // 2, w // 2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(shape)


def pool_mask(mask):
    """OR-pool a binary mask over 2x2 blocks."""
    return MaxPool2d._blocks(mask).max(axis=-1)


class UpsampleConcat:
    """Nearest 2x upsampling of ``low`` followed by channel concat with ``skip``."""

    def __init__(self):
        self._split = None

    def forward(self, low, skip):
        if (2 * low.shape[1], 2 * low.shape[2]) != skip.shape[1:]:
            raise ShapeError(f"cannot upsample {low.shape} onto skip {skip.shape}")
        up = low.repeat(2, axis=1).repeat(2, axis=2)
        self._split = low.shape[0]
        return np.concatenate([up, skip.astype(low.dtype, copy=False)], axis=0)

    def backward(self, grad):
        c = self._split
        gup, gskip = grad[:c], grad[c:]
        _, h, w = gup.shape
        glow = gup.reshape(c, h // 2, 2, w // 2, 2).sum(axis=(2, 4))
        return glow, gskip


class Dropout:
    """Inverted dropout; the mask is drawn from the supplied generator."""

    def __init__(self, rate=0.3):
        if not 0 <= rate < 1:
            raise ValueError("dropout rate must lie in [0, 1)")
        self.rate = rate
        self._mask = None

    def forward(self, x, rng=None, active=True):
        if not active or self.rate == 0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (rng.random(x.shape) < keep).astype(x.dtype) / x.dtype.type(keep)
        return x * self._mask

    def backward(self, grad):
        return grad if self._mask is None else grad * self._mask


class Sigmoid:
    def __init__(self):
        self._out = None

    def forward(self, x):
        # split by sign so exp never overflows
        e = np.exp(-np.abs(x))
        out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype, copy=False)
        self._out = out
        return out

    def backward(self, grad):
        return grad * self._out * (1 - self._out)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_step(param, state, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; zeroes ``param.grad`` afterwards."""
    g = param.grad
    state.t += 1
    state.m *= beta1
    state.m += (1 - beta1) * g
    state.v *= beta2
    state.v += (1 - beta2) * g * g
    mhat = state.m / (1 - beta1**state.t)
    vhat = state.v / (1 - beta2**state.t)
    param.value -= (lr * mhat / (np.sqrt(vhat) + eps)).astype(param.value.dtype, copy=False)
    param.zero_grad()


class Adam:
    def __init__(self, params, lr=1e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr, self.betas, self.eps = lr, betas, eps
        self.states = [AdamState(np.zeros_like(p.value), np.zeros_like(p.value))
                       for p in self.params]

    def step(self):
        for p, s in zip(self.params, self.states):
            adam_step(p, s, self.lr, self.betas[0], self.betas[1], self.eps)


# Checkpoint layout: an uncompressed numpy ``.npz`` archive holding one
# array per parameter under ``param/<name>`` (shape and dtype are carried by
# the array header) and a UTF-8 JSON document under ``meta`` (a 0-d string
# array) with the training configuration and image dimensions.

def save_checkpoint(path, params, meta):
    arrays = {f"param/{name}": p.value for name, p in params.items()}
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Return ``(arrays_by_name, meta_dict)`` from :func:`save_checkpoint` output."""
    with np.load(Path(path), allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        arrays = {k[len("param/"):]: z[k] for k in z.files if k.startswith("param/")}
    return arrays, meta
