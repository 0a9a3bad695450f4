"""Secondary-component tests: the CSV-to-figure renderer.

The input CSV is produced by invoking the installed CLI, so the renderer
is exercised strictly through the primary's external interface.
"""

import subprocess
import sys
from pathlib import Path

import pytest

PLOTS_DIR = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(PLOTS_DIR))

import render  # noqa: E402

SWEEP_CFG = """
[data]
dist = ar1
dims = 3
vocab = 8

[model]
source = masked
schedule = linear

[run]
grid = optimal
delta = 0.01
K = 2,4,8,16,50
seeds = 0,1,2,3,4,5,6,7,8,9
n_samples = 2000
tv_coords = 0,1,2
timing = wall
out = {out}

[samplers]
list = tau_leaping,euler,time_corrected,location_corrected
"""


@pytest.fixture(scope="module")
def sweep_csv(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("sweep")
    cfg = tmp / "run.cfg"
    out = tmp / "bench.csv"
    cfg.write_text(SWEEP_CFG.format(out=out))
    proc = subprocess.run(
        [sys.executable, "-m", "discflow", "sweep", str(cfg)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return out


def run_render(*args):
    return subprocess.run([sys.executable, str(PLOTS_DIR / "render.py"), *args],
                          capture_output=True, text=True)


class TestRenderSmoke:
    def test_three_panels_four_legend_entries(self, sweep_csv, tmp_path):
        out = tmp_path / "fig.png"
        proc = run_render("--csv", str(sweep_csv), "--out", str(out))
        assert proc.returncode == 0, proc.stderr
        assert out.exists() and out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

        rows = render.load_rows(str(sweep_csv))
        fig = render.build_figure(rows, list(render.PANELS))
        try:
            assert len(fig.axes) == 3
            legend = fig.axes[0].get_legend()
            labels = [t.get_text() for t in legend.get_texts()]
            assert labels == ["tau_leaping", "euler", "time_corrected",
                              "location_corrected"]
        finally:
            import matplotlib.pyplot as plt

            plt.close(fig)

    def test_panel_subset(self, sweep_csv, tmp_path):
        out = tmp_path / "one.png"
        proc = run_render("--csv", str(sweep_csv), "--out", str(out),
                          "--panels", "tv_vs_steps")
        assert proc.returncode == 0, proc.stderr
        assert out.exists()

    def test_single_row_csv(self, tmp_path):
        csv = tmp_path / "single.csv"
        csv.write_text("sampler,K,seed,n_samples,tv,nfe_mean,wall_seconds\n"
                       "euler,4,0,100,0.25,4.0,0.01\n")
        out = tmp_path / "single.png"
        proc = run_render("--csv", str(csv), "--out", str(out))
        assert proc.returncode == 0, proc.stderr
        assert out.exists()

    def test_render_is_deterministic(self, sweep_csv, tmp_path):
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        assert run_render("--csv", str(sweep_csv), "--out", str(a)).returncode == 0
        assert run_render("--csv", str(sweep_csv), "--out", str(b)).returncode == 0
        assert a.read_bytes() == b.read_bytes()


class TestRenderErrors:
    def test_truncated_row_names_line(self, sweep_csv, tmp_path):
        text = sweep_csv.read_text()
        broken = tmp_path / "broken.csv"
        broken.write_text(text[: text.rfind(",")])  # cut the last row short
        proc = run_render("--csv", str(broken), "--out", str(tmp_path / "x.png"))
        assert proc.returncode != 0
        assert "row" in proc.stderr

    def test_missing_column_named(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("sampler,K,seed,n_samples,nfe_mean,wall_seconds\n"
                       "euler,4,0,100,4.0,0.01\n")
        proc = run_render("--csv", str(bad), "--out", str(tmp_path / "x.png"))
        assert proc.returncode != 0
        assert "tv" in proc.stderr

    def test_bad_value_names_row(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("sampler,K,seed,n_samples,tv,nfe_mean,wall_seconds\n"
                       "euler,four,0,100,0.1,4.0,0.01\n")
        proc = run_render("--csv", str(bad), "--out", str(tmp_path / "x.png"))
        assert proc.returncode != 0
        assert "row 2" in proc.stderr

    def test_missing_file(self, tmp_path):
        proc = run_render("--csv", str(tmp_path / "none.csv"),
                          "--out", str(tmp_path / "x.png"))
        assert proc.returncode == 1

    def test_empty_file(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        proc = run_render("--csv", str(empty), "--out", str(tmp_path / "x.png"))
        assert proc.returncode == 1
        assert "header" in proc.stderr

    def test_unknown_panel_rejected(self, sweep_csv, tmp_path):
        proc = run_render("--csv", str(sweep_csv), "--out", str(tmp_path / "x.png"),
                          "--panels", "bogus")
        assert proc.returncode == 2  # argparse choice error
