"""Independent oracles shared by the unit and acceptance tests."""

import contextlib
import math

import numpy as np

from sssdenoise import nn
from sssdenoise import self2self as s2s


def ssim_oracle(x, y, window=11, sigma=1.5, k1=0.01, k2=0.03, peak=1.0,
                alpha=1.0, beta=1.0, gamma=1.0):
    """Per-window SSIM with explicit loops, averaged over valid windows."""
    r = window // 2
    g = [[math.exp(-(i * i + j * j) / (2 * sigma * sigma)) for j in range(-r, r + 1)]
         for i in range(-r, r + 1)]
    tot = sum(map(sum, g))
    g = [[v / tot for v in row] for row in g]
    c1, c2 = (k1 * peak) ** 2, (k2 * peak) ** 2
    c3 = c2 / 2
    h, w = x.shape
    vals = []
    for i0 in range(h - window + 1):
        for j0 in range(w - window + 1):
            mx = my = 0.0
            for i in range(window):
                for j in range(window):
                    mx += g[i][j] * x[i0 + i, j0 + j]
                    my += g[i][j] * y[i0 + i, j0 + j]
            vx = vy = cxy = 0.0
            for i in range(window):
                for j in range(window):
                    dx = x[i0 + i, j0 + j] - mx
                    dy = y[i0 + i, j0 + j] - my
                    vx += g[i][j] * dx * dx
                    vy += g[i][j] * dy * dy
                    cxy += g[i][j] * dx * dy
            sx, sy = math.sqrt(vx), math.sqrt(vy)
            lum = (2 * mx * my + c1) / (mx * mx + my * my + c1)
            con = (2 * sx * sy + c2) / (vx + vy + c2)
            st = (cxy + c3) / (sx * sy + c3)
            vals.append(lum**alpha * con**beta * math.copysign(abs(st) ** gamma, st))
    return sum(vals) / len(vals)


def rel_error(a, n, floor=1e-8):
    return abs(a - n) / max(abs(a), abs(n), floor)


@contextlib.contextmanager
def kink_recorder():
    """Record the LeakyReLU sign patterns and max-pool winners of every
    forward pass run inside the block. Two evaluations with the same
    signature lie on the same smooth piece of the network."""
    sig = []
    lrelu_fwd = nn.LeakyReLU.forward
    pool_fwd = nn.MaxPool2d.forward

    def lrelu(self, x):
        out = lrelu_fwd(self, x)
        sig.append(self._pos.copy())
        return out

    def pool(self, x):
        out = pool_fwd(self, x)
        sig.append(self._cache[1].copy())
        return out

    nn.LeakyReLU.forward = lrelu
    nn.MaxPool2d.forward = pool
    try:
        yield sig
    finally:
        nn.LeakyReLU.forward = lrelu_fwd
        nn.MaxPool2d.forward = pool_fwd


def smooth_margin(f):
    """Smallest distance of any LeakyReLU input from 0, or of any max-pool
    winner from its runner-up, during one call of ``f``."""
    gaps = []
    lrelu_fwd = nn.LeakyReLU.forward
    pool_fwd = nn.MaxPool2d.forward

    def lrelu(self, x):
        gaps.append(np.abs(x).min())
        return lrelu_fwd(self, x)

    def pool(self, x):
        top2 = np.sort(nn.MaxPool2d._blocks(x), axis=-1)[..., -2:]
        gaps.append((top2[..., 1] - top2[..., 0]).min())
        return pool_fwd(self, x)

    nn.LeakyReLU.forward = lrelu
    nn.MaxPool2d.forward = pool
    try:
        f()
    finally:
        nn.LeakyReLU.forward = lrelu_fwd
        nn.MaxPool2d.forward = pool_fwd
    return min(gaps)


def same_piece(s1, s2):
    return len(s1) == len(s2) and all(np.array_equal(a, b) for a, b in zip(s1, s2))


def fd_check(f, arrays, analytic, eps=1e-5, max_coords=None, seed=0):
    """Central-difference check of scalar ``f()`` w.r.t. entries of ``arrays``.

    ``analytic`` holds the matching gradients. Coordinates whose +-eps
    probes land on a different smooth piece than the base point (a
    LeakyReLU sign flip or a max-pool winner change) are skipped.
    Returns ``(max_rel_error, n_checked, n_skipped)``.
    """
    with kink_recorder() as sig:
        f()
        base = list(sig)
    worst, checked, skipped = 0.0, 0, 0
    rng = np.random.default_rng(seed)
    for arr, grad in zip(arrays, analytic):
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        idx = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            idx = rng.choice(flat.size, max_coords, replace=False)
        for i in idx:
            old = flat[i]
            with kink_recorder() as sp:
                flat[i] = old + eps
                fp = f()
            with kink_recorder() as sm:
                flat[i] = old - eps
                fm = f()
            flat[i] = old
            if not (same_piece(base, sp) and same_piece(base, sm)):
                skipped += 1
                continue
            num = (fp - fm) / (2 * eps)
            worst = max(worst, rel_error(gflat[i], num))
            checked += 1
    return worst, checked, skipped


def smooth_network_case(margin=1e-4):
    """A small double-precision U-Net plus masked-loss problem whose base
    point sits at least ``margin`` away from every LeakyReLU kink and
    max-pool tie. Four poolings take a 16x16 input to a 1x1 bottleneck."""
    for seed in range(200):
        net = s2s.UNet(3, 4, alpha=0.1, dropout_rate=0.3, seed=seed, depth=4,
                       dtype=np.float64)
        rng = np.random.default_rng(seed)
        y = rng.random((16, 16))
        pair = s2s.sample_pair(y, 0.7, rng)
        x = pair.R.copy()

        def f(net=net, x=x, pair=pair):
            out = net.forward(x, pair.S, True, np.random.default_rng(5))
            return s2s.masked_loss(out[0], pair.Rbar, pair.S)[0]

        if smooth_margin(f) >= margin:
            return net, x, pair, f
    raise RuntimeError("no smooth base point found")
