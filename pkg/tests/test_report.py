import pytest

from sssdenoise.metrics import MetricReport
from sssdenoise.report import TableRow, parse_csv, plot_losses, render_table


def sample_row():
    return TableRow("self2self", MetricReport(29.5185, 0.9433, 0.8124, 0.2858))


def test_text_layout_matches_table_columns():
    text = render_table([sample_row()], "text")
    header, row = text.splitlines()
    assert header.split() == ["Method", "PSNR", "SSIM", "FI", "EPI"]
    for cell in ("29.5185", "0.9433", "0.8124", "0.2858"):
        assert cell in row.split()


def test_four_decimals():
    row = TableRow("x", MetricReport(23.41286, 0.61847, 0.77318, 0.2))
    assert render_table([row], "csv").splitlines()[1] == "x,23.4129,0.6185,0.7732,0.2000"


def test_annotations_render_as_words():
    row = TableRow("flat", MetricReport("identical", 1.0, "undefined", "undefined"))
    text = render_table([row])
    assert "undefined" in text and "identical" in text
    assert render_table([row], "csv").splitlines()[1] == "flat,identical,1.0000,undefined,undefined"


def test_csv_roundtrip():
    rows = [sample_row(),
            TableRow("median:3", MetricReport(24.0871, 0.6446, 0.9013, 0.1664)),
            TableRow("raw", MetricReport("n/a", "n/a", 1.25, 1.0))]
    text = render_table(rows, "csv")
    assert text.splitlines()[0] == "method,psnr,ssim,fi,epi"
    assert parse_csv(text) == rows


def test_empty_and_bad_format():
    with pytest.raises(ValueError):
        render_table([])
    with pytest.raises(ValueError):
        render_table([sample_row()], "html")


def test_loss_figure(tmp_path):
    plot_losses([0.3 / (i + 1) for i in range(120)], tmp_path / "loss.png")
    assert (tmp_path / "loss.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
