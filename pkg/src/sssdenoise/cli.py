"""``sss-denoise`` command line: noise, filter, denoise, eval, bench.

Settings resolve as built-in defaults < ``--config`` file (``key = value``
lines, ``#`` comments; keys are long option names with ``-`` or ``_``)
< explicit flags.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import self2self
from .bench import BenchmarkRun, Self2SelfSpec, parse_methods, run_benchmark
from .filters import FilterSpec
from .image import load_image, save_image
from .metrics import evaluate
from .noise import NoiseSpec
from .report import TableRow, plot_losses, render_table

log = logging.getLogger("sssdenoise")

# option dest -> type, for values coming from a config file
_CONFIG_TYPES = {
    "seed": int, "iters": int, "keep_prob": float, "dropout": float, "lr": float,
    "ensemble": int, "channels_enc": int, "channels_dec": int, "alpha": float,
    "log_every": int, "noise": str, "filter": str, "methods": str, "format": str,
    "literal_loss": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
}


def read_config(path):
    """Parse a ``key = value`` file into option defaults."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key = key.strip().lstrip("-").replace("-", "_")
        if key not in _CONFIG_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _CONFIG_TYPES[key](value.strip())
    return out


def _add_s2s_options(p):
    d = self2self.TrainConfig()
    g = p.add_argument_group("self-supervised network")
    g.add_argument("--iters", type=int, default=d.iterations, help="training iterations")
    g.add_argument("--keep-prob", type=float, default=d.keep_prob,
                   help="Bernoulli keep probability of the input mask")
    g.add_argument("--dropout", type=float, default=d.dropout_rate, help="dropout rate")
    g.add_argument("--lr", type=float, default=d.lr, help="Adam learning rate")
    g.add_argument("--ensemble", type=int, default=self2self.PredictConfig().ensemble,
                   help="number of averaged predictions")
    g.add_argument("--channels-enc", type=int, default=d.channels_enc)
    g.add_argument("--channels-dec", type=int, default=d.channels_dec)
    g.add_argument("--alpha", type=float, default=d.lrelu_alpha, help="LeakyReLU slope")
    g.add_argument("--literal-loss", action="store_true",
                   help="debug: penalize visible (S=1) pixels instead of hidden ones")
    g.add_argument("--log-every", type=int, default=100,
                   help="print iter/loss to stderr every K iterations (0 = never)")


def _s2s_configs(args):
    train = self2self.TrainConfig(
        keep_prob=args.keep_prob, dropout_rate=args.dropout, lr=args.lr,
        iterations=args.iters, seed=args.seed, lrelu_alpha=args.alpha,
        channels_enc=args.channels_enc, channels_dec=args.channels_dec,
        literal_loss=args.literal_loss)
    return train, self2self.PredictConfig(ensemble=args.ensemble, seed=args.seed)


def _progress(every):
    def observer(it, loss):
        if every and it % every == 0:
            print(f"iter={it} loss={loss:.6g}", file=sys.stderr, flush=True)
    return observer


def build_parser():
    parser = argparse.ArgumentParser(prog="sss-denoise", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value settings file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("noise", help="corrupt an image with synthetic noise")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--noise", required=True, help="gaussian:SIGMA | saltpepper:DENSITY | speckle:SIGMA")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("filter", help="apply one classical filter")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--filter", required=True,
                   help="mean:K | median:K | bilateral:R,SIGMA_S,SIGMA_R | wiener:K")

    p = sub.add_parser("denoise", help="train on one noisy image and predict")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint", help="also save the trained parameters here (.npz)")
    p.add_argument("--loss-plot", help="save a training-loss figure here (.png)")
    _add_s2s_options(p)

    p = sub.add_parser("eval", help="compute PSNR/SSIM/FI/EPI for an output image")
    p.add_argument("--in", dest="input", required=True, help="denoised image")
    p.add_argument("--raw", required=True, help="noisy input the output came from")
    p.add_argument("--clean", help="clean reference (enables PSNR/SSIM)")
    p.add_argument("--name", default="output")
    p.add_argument("--format", choices=("text", "csv"), default="text")

    p = sub.add_parser("bench", help="corrupt, run every method, and tabulate")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--clean", help="clean image (corrupted with --noise)")
    src.add_argument("--in", dest="input", help="already-noisy image")
    p.add_argument("--reference", help="clean reference for an already-noisy --in")
    p.add_argument("--noise", help="noise spec; required with --clean")
    p.add_argument("--methods", default="mean:3,median:3,bilateral:2,2.0,0.1,wiener:3,self2self")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-figures", action="store_true")
    _add_s2s_options(p)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    pre, _ = parser.parse_known_args(argv)
    if pre.config:
        cfg = read_config(pre.config)
        for action in parser._subparsers._group_actions:
            for subp in action.choices.values():
                known = {a.dest for a in subp._actions}
                subp.set_defaults(**{k: v for k, v in cfg.items() if k in known})
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (OSError, ValueError, IndexError) as e:
        print(f"sss-denoise: error: {e}", file=sys.stderr)
        return 1


def _dispatch(args):
    if args.command == "noise":
        spec = NoiseSpec.parse(args.noise, args.seed)
        save_image(spec.apply(load_image(args.input)), args.out)
    elif args.command == "filter":
        save_image(FilterSpec.parse(args.filter).apply(load_image(args.input)), args.out)
    elif args.command == "denoise":
        train, predict = _s2s_configs(args)
        out, model = self2self.denoise(load_image(args.input), train, predict,
                                       _progress(args.log_every))
        save_image(out, args.out)
        if args.checkpoint:
            model.save(args.checkpoint)
        if args.loss_plot:
            plot_losses(model.losses, args.loss_plot)
    elif args.command == "eval":
        out = load_image(args.input)
        raw = load_image(args.raw)
        clean = load_image(args.clean) if args.clean else None
        row = TableRow(args.name, evaluate(out, raw, clean))
        sys.stdout.write(render_table([row], args.format))
    elif args.command == "bench":
        if args.clean and not args.noise:
            raise ValueError("--clean needs --noise (use --in for an already-noisy image)")
        train, predict = _s2s_configs(args)
        methods = parse_methods(args.methods, Self2SelfSpec(train, predict))
        run = BenchmarkRun(
            source=args.clean or args.input,
            clean_reference=args.reference,
            noise=NoiseSpec.parse(args.noise, args.seed) if args.clean else None,
            methods=methods, output_dir=args.out_dir, seed=args.seed,
            figures=not args.no_figures)
        rows = run_benchmark(run, _progress(args.log_every))
        sys.stdout.write(render_table(rows, args.format))
    return 0


if __name__ == "__main__":
    sys.exit(main())
