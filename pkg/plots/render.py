#!/usr/bin/env python3
"""Render benchmark panels from a sweep CSV.

Consumes the CSV the sweep command writes (header
``sampler,K,seed,n_samples,tv,nfe_mean,wall_seconds``) and draws up to
three panels: total variation vs sampling time, total variation vs number
of steps, and sampling time vs number of steps.  One mean line per
sampler, with a min/max band over the seeds of each (sampler, K) cell.
The TV axis is log-scaled.

Usage:
    python3 plots/render.py --csv sweep.csv --out figure.png [--panels ...]

Exit codes: 0 on success, 1 on a malformed CSV (the message names the bad
row or column), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

EXPECTED_COLUMNS = ["sampler", "K", "seed", "n_samples", "tv", "nfe_mean",
                    "wall_seconds"]
PANELS = ["tv_vs_time", "tv_vs_steps", "time_vs_steps"]

PANEL_AXES = {
    "tv_vs_time": ("sampling time (s)", "total variation"),
    "tv_vs_steps": ("number of steps K", "total variation"),
    "time_vs_steps": ("number of steps K", "sampling time (s)"),
}


class CsvFormatError(Exception):
    """Raised with a message naming the offending row or column."""


@dataclass
class Row:
    sampler: str
    K: int
    seed: int
    tv: float
    wall_seconds: float


@dataclass
class FigureSpec:
    csv: str
    out: str
    panels: list[str] = field(default_factory=lambda: list(PANELS))


def load_rows(csv_path: str) -> list[Row]:
    try:
        with open(csv_path) as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise CsvFormatError(f"cannot read {csv_path!r}: {exc}") from None
    if not lines:
        raise CsvFormatError(f"{csv_path}: empty file, expected a header line")
    header = lines[0].split(",")
    for col in EXPECTED_COLUMNS:
        if col not in header:
            raise CsvFormatError(f"{csv_path}: missing column '{col}' in header")
    idx = {col: header.index(col) for col in EXPECTED_COLUMNS}
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise CsvFormatError(
                f"{csv_path}: row {lineno} has {len(parts)} fields, "
                f"expected {len(header)}"
            )
        try:
            rows.append(Row(
                sampler=parts[idx["sampler"]],
                K=int(parts[idx["K"]]),
                seed=int(parts[idx["seed"]]),
                tv=float(parts[idx["tv"]]),
                wall_seconds=float(parts[idx["wall_seconds"]]),
            ))
        except ValueError as exc:
            raise CsvFormatError(f"{csv_path}: row {lineno}: {exc}") from None
    if not rows:
        raise CsvFormatError(f"{csv_path}: no data rows after the header")
    return rows


def aggregate(rows: list[Row]):
    """Per (sampler, K): mean/min/max TV and wall time over seeds.

    Samplers keep their order of first appearance; K is sorted.
    """
    samplers = []
    cells: dict[tuple[str, int], list[Row]] = {}
    for row in rows:
        if row.sampler not in samplers:
            samplers.append(row.sampler)
        cells.setdefault((row.sampler, row.K), []).append(row)
    series = {}
    for name in samplers:
        ks = sorted({k for s, k in cells if s == name})
        stat = {"K": ks}
        for fieldname in ("tv", "wall_seconds"):
            values = [[getattr(r, fieldname) for r in cells[(name, k)]] for k in ks]
            stat[fieldname] = {
                "mean": [sum(v) / len(v) for v in values],
                "min": [min(v) for v in values],
                "max": [max(v) for v in values],
            }
        series[name] = stat
    return series


def build_figure(rows: list[Row], panels: list[str]):
    series = aggregate(rows)
    fig, axes = plt.subplots(1, len(panels), figsize=(5.0 * len(panels), 3.8))
    if len(panels) == 1:
        axes = [axes]
    for ax, panel in zip(axes, panels):
        for name, stat in series.items():
            if panel == "tv_vs_time":
                x = stat["wall_seconds"]["mean"]
                y, lo, hi = (stat["tv"][k] for k in ("mean", "min", "max"))
            elif panel == "tv_vs_steps":
                x = stat["K"]
                y, lo, hi = (stat["tv"][k] for k in ("mean", "min", "max"))
            else:
                x = stat["K"]
                y, lo, hi = (stat["wall_seconds"][k] for k in ("mean", "min", "max"))
            order = sorted(range(len(x)), key=lambda i: x[i])
            xs = [x[i] for i in order]
            line, = ax.plot(xs, [y[i] for i in order], marker="o", label=name)
            ax.fill_between(xs, [lo[i] for i in order], [hi[i] for i in order],
                            alpha=0.2, color=line.get_color())
        if panel.startswith("tv"):
            ax.set_yscale("log")
        xlabel, ylabel = PANEL_AXES[panel]
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
    axes[0].legend()
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> None:
    """Read the CSV and write the multi-panel image; pure function of the CSV."""
    for panel in spec.panels:
        if panel not in PANELS:
            raise CsvFormatError(f"unknown panel '{panel}'; choose from {PANELS}")
    rows = load_rows(spec.csv)
    fig = build_figure(rows, spec.panels)
    fig.savefig(spec.out, dpi=120)
    plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Render TV/steps/time panels from a sweep CSV")
    parser.add_argument("--csv", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--panels", nargs="+", choices=PANELS, default=list(PANELS))
    args = parser.parse_args(argv)
    try:
        render(FigureSpec(csv=args.csv, out=args.out, panels=list(args.panels)))
    except CsvFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
