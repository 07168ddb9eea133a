"""Result tables (text / CSV) and matplotlib figures for benchmark runs."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .metrics import MetricReport

HEADER = ("Method", "PSNR", "SSIM", "FI", "EPI")


@dataclass
class TableRow:
    method: str
    report: MetricReport


def fmt_cell(v):
    if isinstance(v, str):
        return v
    return f"{v:.4f}"


def render_table(rows, fmt="text"):
    if not rows:
        raise ValueError("nothing to render")
    cells = [[r.method] + [fmt_cell(v) for v in r.report.values()] for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([h.lower() for h in HEADER])
        w.writerows(cells)
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown table format {fmt!r}")
    table = [list(HEADER)] + cells
    widths = [max(len(row[i]) for row in table) for i in range(len(HEADER))]
    lines = []
    for row in table:
        first = row[0].ljust(widths[0])
        rest = [c.rjust(wd) for c, wd in zip(row[1:], widths[1:])]
        lines.append("  ".join([first] + rest))
    return "\n".join(lines) + "\n"


def _parse_cell(s):
    try:
        return float(s)
    except ValueError:
        return s


def parse_csv(text):
    rd = csv.reader(io.StringIO(text))
    header = next(rd)
    if [h.lower() for h in header] != [h.lower() for h in HEADER]:
        raise ValueError(f"unexpected header {header}")
    return [TableRow(rec[0], MetricReport(*[_parse_cell(c) for c in rec[1:]]))
            for rec in rd if rec]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


# no timestamps or version strings, so reruns give byte-identical files
_PNG_META = {"Software": None}


def plot_gallery(images, path, ncols=4):
    """Save a grid of ``(title, GrayImage)`` panels."""
    plt = _pyplot()
    n = len(images)
    ncols = min(ncols, n)
    nrows = -(-n // ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(3 * ncols, 3.2 * nrows), squeeze=False)
    for ax in axes.flat:
        ax.axis("off")
    for ax, (title, img) in zip(axes.flat, images):
        ax.imshow(img.pixels, cmap="gray", vmin=0, vmax=1, interpolation="nearest")
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)


def plot_metrics(rows, path):
    """One bar panel per index; annotated (non-numeric) cells are drawn empty."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, 4, figsize=(13, 3.2))
    names = [r.method for r in rows]
    x = np.arange(len(rows))
    for ax, field, label in zip(axes, MetricReport.FIELDS, HEADER[1:]):
        vals = [getattr(r.report, field) for r in rows]
        nums = [v if not isinstance(v, str) else np.nan for v in vals]
        ax.bar(x, nums, color="0.4")
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
        ax.set_title(label)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)


def plot_losses(losses, path, window=50):
    plt = _pyplot()
    losses = np.asarray(losses, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    it = np.arange(1, len(losses) + 1)
    ax.plot(it, losses, color="0.75", lw=0.6, label="per step")
    if len(losses) >= window:
        smooth = np.convolve(losses, np.ones(window) / window, mode="valid")
        ax.plot(it[window - 1:], smooth, color="k", lw=1.2, label=f"{window}-step mean")
    ax.set_xlabel("iteration")
    ax.set_ylabel("masked loss")
    ax.set_yscale("log")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
