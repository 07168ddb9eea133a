"""Single-image self-supervised denoising with Bernoulli-sampled pairs.

Each training step splits the noisy image ``y`` with a random binary mask
``S`` into the visible part ``R = S*y`` and the hidden part
``Rbar = (1-S)*y``. A partial-convolution U-Net sees only ``R`` and is
penalized on the hidden pixels. At inference the network is run ``N``
times with fresh masks and live dropout, and the outputs are averaged.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .image import GrayImage, clip_image, pad_reflect, unpad

log = logging.getLogger(__name__)

DEPTH = 5  # number of 2x poolings in the encoder
ALIGN = 2**DEPTH


@dataclass
class TrainConfig:
    keep_prob: float = 0.7
    dropout_rate: float = 0.3
    lr: float = 1e-4
    iterations: int = 5000
    seed: int = 0
    lrelu_alpha: float = 0.1
    channels_enc: int = 48
    channels_dec: int = 96
    # penalize on S=1 pixels instead of the complement; comparison only
    literal_loss: bool = False

    def __post_init__(self):
        if not 0 < self.keep_prob < 1:
            raise ValueError("keep_prob must lie strictly inside (0, 1)")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.channels_enc < 1 or self.channels_dec < 1:
            raise ValueError("channel widths must be positive")


@dataclass
class PredictConfig:
    ensemble: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.ensemble < 1:
            raise ValueError("ensemble size must be >= 1")


@dataclass(frozen=True)
class SamplePair:
    R: np.ndarray
    Rbar: np.ndarray
    S: np.ndarray


def sample_pair(y, p, rng, mask=None):
    """Draw ``S ~ Bernoulli(p)`` and split ``y`` into ``(S*y, (1-S)*y)``.

    ``mask`` overrides the draw (used to probe the degenerate all-ones and
    all-zeros cases, which a valid ``p`` can never force).
    """
    a = y.pixels if isinstance(y, GrayImage) else np.asarray(y)
    if mask is None:
        if not 0 < p < 1:
            raise ValueError("p must lie strictly inside (0, 1)")
        S = (rng.random(a.shape) < p).astype(a.dtype)
    else:
        S = np.asarray(mask, dtype=a.dtype)
        if S.shape != a.shape or not np.all((S == 0) | (S == 1)):
            raise ValueError("forced mask must be binary and match the image")
    # where() keeps R + Rbar == y bit-exact
    R = np.where(S == 1, a, 0).astype(a.dtype)
    Rbar = np.where(S == 0, a, 0).astype(a.dtype)
    return SamplePair(R, Rbar, S)


def masked_loss(pred, target, S, literal=False):
    """Mean squared error over the pixels hidden from the input (``S == 0``).

    Returns ``(loss, grad)`` with ``grad`` shaped like ``pred``; the
    gradient is exactly zero wherever ``S == 1``. With ``literal=True`` the
    roles flip and the loss is taken over ``S == 1`` instead.
    """
    pred = np.asarray(pred)
    p2 = pred.reshape(np.shape(target))
    if p2.shape != np.shape(S):
        raise ValueError("pred, target and mask dims must agree")
    sel = (np.asarray(S) == 1) if literal else (np.asarray(S) == 0)
    count = int(sel.sum())
    if count == 0:
        raise ValueError("loss region of the mask is empty")
    diff = np.where(sel, p2 - target, 0)
    loss = float((diff.astype(np.float64) ** 2).sum() / count)
    grad = (2.0 / count) * diff
    return loss, grad.reshape(pred.shape).astype(pred.dtype, copy=False)


class UNet:
    """Partial-convolution encoder, plain-convolution decoder, sigmoid head.

    ``depth`` poolings (default 5): encoder blocks ``enc1..enc{depth+1}``
    are a 3x3 partial conv + LeakyReLU, with max pooling after all but the
    last. Decoder blocks ``dec1..dec{depth}`` upsample, concatenate the
    matching encoder output and apply two 3x3 conv + LeakyReLU + dropout
    stages.
    """

    def __init__(self, channels_enc=48, channels_dec=96, alpha=0.1,
                 dropout_rate=0.3, seed=0, depth=DEPTH, dtype=np.float32):
        self.depth = depth
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        ce, cd = channels_enc, channels_dec
        self.enc = []
        for i in range(depth + 1):
            self.enc.append(nn.PartialConv2d(1 if i == 0 else ce, ce, 3, rng=rng,
                                             negative_slope=alpha, dtype=dtype))
        self.dec = []
        for j in range(depth):
            cin = (ce if j == 0 else cd) + ce
            self.dec.append((nn.Conv2d(cin, cd, 3, rng=rng, negative_slope=alpha, dtype=dtype),
                             nn.Conv2d(cd, cd, 3, rng=rng, negative_slope=alpha, dtype=dtype)))
        self.head = nn.Conv2d(cd, 1, 3, rng=rng, negative_slope=alpha, dtype=dtype)
        self.alpha = alpha
        self.dropout_rate = dropout_rate
        self._tape = None

    def named_parameters(self):
        out = {}
        for i, layer in enumerate(self.enc, 1):
            out[f"enc{i}.weight"], out[f"enc{i}.bias"] = layer.parameters()
        for j, (c1, c2) in enumerate(self.dec, 1):
            out[f"dec{j}.conv1.weight"], out[f"dec{j}.conv1.bias"] = c1.parameters()
            out[f"dec{j}.conv2.weight"], out[f"dec{j}.conv2.bias"] = c2.parameters()
        out["head.weight"], out["head.bias"] = self.head.parameters()
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def n_parameters(self):
        return sum(p.value.size for p in self.parameters())

    def astype(self, dtype):
        self.dtype = np.dtype(dtype)
        for p in self.parameters():
            p.astype(dtype)
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def forward(self, x, mask, dropout_active=False, rng=None):
        """Run the network on ``x`` (H, W) or (1, H, W) with validity ``mask``.

        Returns the (1, H, W) prediction strictly inside (0, 1).
        """
        x = np.asarray(x, dtype=self.dtype).reshape((1,) + np.shape(x)[-2:])
        m = np.asarray(mask, dtype=self.dtype).reshape(x.shape)
        h, w = x.shape[1:]
        if h % 2**self.depth or w % 2**self.depth:
            raise nn.ShapeError(f"dims {h}x{w} not divisible by {2**self.depth}")
        if dropout_active and self.dropout_rate > 0 and rng is None:
            raise ValueError("active dropout needs a random generator")
        tape = []
        skips = []
        for i, pconv in enumerate(self.enc):
            act = nn.LeakyReLU(self.alpha)
            x, m = pconv.forward(x, m)
            x = act.forward(x)
            rec = {"pconv": pconv, "act": act}
            if i < self.depth:
                skips.append(x)
                pool = nn.MaxPool2d()
                x = pool.forward(x)
                m = nn.pool_mask(m)
                rec["pool"] = pool
            tape.append(rec)
        dec_tape = []
        for j, (c1, c2) in enumerate(self.dec):
            cat = nn.UpsampleConcat()
            x = cat.forward(x, skips[self.depth - 1 - j])
            stages = []
            for conv in (c1, c2):
                act = nn.LeakyReLU(self.alpha)
                drop = nn.Dropout(self.dropout_rate)
                x = drop.forward(act.forward(conv.forward(x)), rng, dropout_active)
                stages.append((conv, act, drop))
            dec_tape.append((cat, stages))
        sig = nn.Sigmoid()
        out = sig.forward(self.head.forward(x))
        self._tape = (tape, dec_tape, sig)
        return out

    def backward(self, grad):
        """Accumulate parameter gradients for the last forward pass.

        Returns the gradient w.r.t. the network input.
        """
        tape, dec_tape, sig = self._tape
        g = self.head.backward(sig.backward(np.asarray(grad, dtype=self.dtype)))
        skip_grads = [None] * self.depth
        for j in reversed(range(self.depth)):
            cat, stages = dec_tape[j]
            for conv, act, drop in reversed(stages):
                g = conv.backward(act.backward(drop.backward(g)))
            g, gskip = cat.backward(g)
            skip_grads[self.depth - 1 - j] = gskip
        for i in reversed(range(len(tape))):
            rec = tape[i]
            if "pool" in rec:
                g = rec["pool"].backward(g) + skip_grads[i]
            g = rec["pconv"].backward(rec["act"].backward(g))
        return g


@dataclass
class TrainedModel:
    net: UNet
    config: TrainConfig
    dims: tuple  # (width, height) the model was trained on
    losses: list = field(default_factory=list)

    @property
    def parameters(self):
        return self.net.named_parameters()

    def save(self, path):
        meta = {"train_config": dataclasses.asdict(self.config),
                "dims": list(self.dims), "depth": self.net.depth}
        nn.save_checkpoint(path, self.net.named_parameters(), meta)

    @classmethod
    def load(cls, path):
        arrays, meta = nn.load_checkpoint(path)
        cfg = TrainConfig(**meta["train_config"])
        net = UNet(cfg.channels_enc, cfg.channels_dec, cfg.lrelu_alpha,
                   cfg.dropout_rate, cfg.seed, depth=meta["depth"])
        params = net.named_parameters()
        if set(arrays) != set(params):
            raise ValueError("checkpoint parameter names do not match the architecture")
        for name, p in params.items():
            if arrays[name].shape != p.shape:
                raise ValueError(f"{name}: shape {arrays[name].shape} != {p.shape}")
            p.value = arrays[name].copy()
            p.grad = np.zeros_like(p.value)
        net.dtype = params["head.weight"].value.dtype
        return cls(net, cfg, tuple(meta["dims"]))


def build_unet(cfg: TrainConfig, dims) -> TrainedModel:
    """Untrained model for an image of ``dims = (width, height)``."""
    w, h = dims
    if w % ALIGN or h % ALIGN:
        raise ValueError(f"dims {w}x{h} must be divisible by {ALIGN}; pad the image first")
    net = UNet(cfg.channels_enc, cfg.channels_dec, cfg.lrelu_alpha,
               cfg.dropout_rate, cfg.seed)
    return TrainedModel(net, cfg, (w, h))


def forward(model: TrainedModel, masked_input, mask, dropout_active=False, rng=None):
    a = masked_input.pixels if isinstance(masked_input, GrayImage) else np.asarray(masked_input)
    if (a.shape[-1], a.shape[-2]) != tuple(model.dims):
        raise ValueError(f"input {a.shape} does not match model dims {model.dims}")
    return model.net.forward(a, mask, dropout_active, rng)


def train(y: GrayImage, cfg: TrainConfig, observer=None) -> TrainedModel:
    """Fit a fresh network to ``y`` (dims must already be multiples of 32).

    ``observer(iteration, loss)`` is called after every step, 1-based.
    """
    model = build_unet(cfg, (y.width, y.height))
    net = model.net
    opt = nn.Adam(net.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    target = y.pixels.astype(net.dtype)
    for it in range(1, cfg.iterations + 1):
        pair = sample_pair(target, cfg.keep_prob, rng)
        pred = net.forward(pair.R, pair.S, dropout_active=True, rng=rng)
        loss, grad = masked_loss(pred[0], pair.Rbar, pair.S, literal=cfg.literal_loss)
        net.backward(grad[None])
        opt.step()
        model.losses.append(loss)
        if observer is not None:
            observer(it, loss)
    return model


def predict_ensemble(model: TrainedModel, y: GrayImage, cfg: PredictConfig,
                     capture=None) -> GrayImage:
    """Average ``N`` stochastic forward passes, each with its own mask and
    dropout draw from a per-member sub-stream of ``cfg.seed``.

    ``capture``, if a list, receives each member prediction.
    """
    net = model.net
    a = y.pixels.astype(net.dtype)
    streams = np.random.SeedSequence([cfg.seed, 2]).spawn(cfg.ensemble)
    acc = np.zeros(a.shape, dtype=np.float64)
    for ss in streams:
        rng = np.random.default_rng(ss)
        pair = sample_pair(a, model.config.keep_prob, rng)
        out = forward(model, pair.R, pair.S, dropout_active=True, rng=rng)[0]
        if capture is not None:
            capture.append(out.copy())
        acc += out
    return clip_image(acc / cfg.ensemble)


def denoise(y: GrayImage, train_cfg: TrainConfig, predict_cfg: PredictConfig,
            observer=None):
    """Pad, train, predict and un-pad. Returns ``(denoised, model)``."""
    padded, dims = pad_reflect(y, ALIGN)
    model = train(padded, train_cfg, observer)
    out = predict_ensemble(model, padded, predict_cfg)
    return unpad(out, dims), model
