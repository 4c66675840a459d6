"""Report files: CSV table, key/value summary, two-column plot data."""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .experiments import ConvergenceReport


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(rep: ConvergenceReport, fh) -> None:
    fh.write(",".join(rep.columns) + "\n")
    for row in rep.rows:
        fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_summary(rep: ConvergenceReport, fh) -> None:
    lines = [
        ("kind", rep.kind),
        ("name", rep.name),
        ("config_hash", rep.config_hash),
        ("rows", len(rep.rows)),
        ("fit_rows", rep.fit_rows),
        ("fit_abscissa", rep.x_column),
    ]
    for norm, (slope, r2) in rep.fits.items():
        lines.append((f"fitted_order.{norm}", slope))
        lines.append((f"r_squared.{norm}", r2))
    for key in sorted(rep.flags):
        lines.append((f"flag.{key}", rep.flags[key]))
    for key in sorted(rep.tolerances):
        lines.append((f"tolerance.{key}", rep.tolerances[key]))
    for k, v in lines:
        fh.write(f"{k} = {_fmt(v)}\n")


def write_plot(rep: ConvergenceReport, norm: str, fh) -> None:
    """``x y`` pairs sorted by ``x`` descending (coarse to fine)."""
    pairs = sorted(zip(rep.column(rep.x_column), rep.column(norm)), key=lambda t: -t[0])
    fh.write(f"# {rep.x_column} {norm}\n")
    for x, y in pairs:
        fh.write(f"{_fmt(float(x))} {_fmt(float(y))}\n")


def emit_report(rep: ConvergenceReport, out_dir, formats=("csv", "summary")) -> list[Path]:
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    written = []

    def target(suffix):
        path = out / f"{rep.name}{suffix}"
        written.append(path)
        return open(path, "w", encoding="utf-8", newline="\n")

    if "csv" in formats:
        with target(".csv") as fh:
            write_csv(rep, fh)
    if "summary" in formats:
        with target(".summary.txt") as fh:
            write_summary(rep, fh)
    if "plot" in formats:
        for norm in rep.norms:
            with target(f".{norm}.dat") as fh:
                write_plot(rep, norm, fh)
    return written
