"""Corrupt / denoise / evaluate pipeline producing table rows and artifacts."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import self2self
from .filters import FilterSpec
from .image import GrayImage, load_image, save_pgm
from .metrics import evaluate
from .noise import NoiseSpec
from .report import TableRow, plot_gallery, plot_metrics, render_table

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Self2SelfSpec:
    train: self2self.TrainConfig = field(default_factory=self2self.TrainConfig)
    predict: self2self.PredictConfig = field(default_factory=self2self.PredictConfig)

    name = "self2self"

    def apply(self, img, observer=None):
        out, _ = self2self.denoise(img, self.train, self.predict, observer)
        return out


def parse_methods(text, s2s=None):
    """Split ``mean:3,median:3,bilateral:2,2.0,0.1,self2self`` into specs.

    Commas separate both methods and parameters; a bare number continues the
    previous method's parameter list.
    """
    specs = []
    current = None
    for tok in (t.strip() for t in text.split(",")):
        if not tok:
            continue
        if re.fullmatch(r"[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?", tok):
            if current is None:
                raise ValueError(f"parameter {tok!r} has no method")
            current.append(tok)
            continue
        if current is not None:
            specs.append(current)
        current = [tok]
    if current is not None:
        specs.append(current)
    out = []
    for parts in specs:
        head = parts[0]
        if head.lower() == "self2self":
            out.append(s2s or Self2SelfSpec())
        else:
            kind, _, first = head.partition(":")
            params = ([first] if first else []) + parts[1:]
            out.append(FilterSpec.parse(kind + (":" + ",".join(params) if params else "")))
    if not out:
        raise ValueError("no methods given")
    return out


def slug(text):
    return re.sub(r"[^A-Za-z0-9.]+", "-", text).strip("-")


@dataclass
class BenchmarkRun:
    source: str | Path | GrayImage
    methods: list
    output_dir: str | Path
    clean_reference: str | Path | GrayImage | None = None
    noise: NoiseSpec | None = None
    seed: int = 0
    figures: bool = True


def _as_image(x):
    return x if isinstance(x, GrayImage) else load_image(x)


def run_benchmark(run: BenchmarkRun, observer=None):
    """Execute ``run`` and return its table rows.

    With ``noise`` set, ``source`` is treated as the clean image and is
    corrupted first; otherwise ``source`` is the noisy input and
    ``clean_reference`` (if any) enables PSNR/SSIM.
    """
    if not run.methods:
        raise ValueError("at least one method is required")
    out_dir = Path(run.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    src = _as_image(run.source)
    if run.noise is not None:
        clean = src
        noisy = run.noise.apply(clean)
        save_pgm(noisy, out_dir / f"noisy_{slug(str(run.noise))}_seed{run.noise.seed}.pgm")
    else:
        noisy = src
        clean = None if run.clean_reference is None else _as_image(run.clean_reference)
    if clean is not None and clean.shape != noisy.shape:
        raise ValueError("clean reference and noisy image differ in size")

    rows = []
    gallery = [("noisy", noisy)] if clean is None else [("clean", clean), ("noisy", noisy)]
    for method in run.methods:
        name = method.name
        log.info("running %s", name)
        if isinstance(method, Self2SelfSpec):
            out = method.apply(noisy, observer)
        else:
            out = method.apply(noisy)
        save_pgm(out, out_dir / f"{slug(name)}_seed{run.seed}.pgm")
        rows.append(TableRow(name, evaluate(out, noisy, clean)))
        gallery.append((name, out))

    (out_dir / "report.txt").write_text(render_table(rows, "text"))
    (out_dir / "report.csv").write_text(render_table(rows, "csv"))
    if run.figures:
        plot_gallery(gallery, out_dir / "gallery.png")
        plot_metrics(rows, out_dir / "metrics.png")
    return rows
