"""Render run-log CSVs into comparison panels.

The input schema is a flat CSV with a `t` column, `true_*` ground-truth
columns, and per-filter metric columns named `<filter>_err_att_deg`,
`<filter>_err_pos_m`, etc.  Filters are discovered from the header, so
any number of them can share one file.  Output is a PNG with no
embedded timestamps; re-rendering the same inputs reproduces the same
bytes.
"""

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

PANELS = ("trajectory", "attitude", "position")


class MissingColumnError(Exception):
    """A required column is absent from the CSV header."""


def load_csv(path):
    """Read one run log; returns (header list, column dict of arrays)."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumnError("%s: empty file, no header" % path)
        rows = [row for row in reader if row]
    cols = {}
    data = np.array(rows, dtype=float) if rows else \
        np.empty((0, len(header)))
    for i, name in enumerate(header):
        cols[name] = data[:, i]
    return header, cols


def _require(cols, name, path):
    if name not in cols:
        raise MissingColumnError(
            "%s: required column %r not found (have: %s)"
            % (path, name, ", ".join(sorted(cols))))
    return cols[name]


def filter_names(header):
    """Filter labels discovered from `<name>_err_att_deg` columns."""
    suffix = "_err_att_deg"
    return [c[:-len(suffix)] for c in header if c.endswith(suffix)]


def _label(path, fname, multi):
    if multi:
        stem = os.path.splitext(os.path.basename(path))[0]
        return "%s %s" % (stem, fname)
    return fname


def _plot_trajectory(ax, path, header, cols):
    x = _require(cols, "true_x", path)
    y = _require(cols, "true_y", path)
    stem = os.path.splitext(os.path.basename(path))[0]
    ax.plot(x, y, label=stem)
    if len(x):
        ax.plot(x[0], y[0], marker="o", color="black", markersize=4)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_title("ground-truth trajectory")


def _plot_metric(ax, path, header, cols, suffix, ylabel, title, multi):
    t = _require(cols, "t", path)
    names = filter_names(header)
    if not names:
        raise MissingColumnError(
            "%s: no '*%s' columns found" % (path, suffix))
    for fname in names:
        series = _require(cols, fname + suffix, path)
        ax.plot(t, series, label=_label(path, fname, multi))
    ax.set_xlabel("t [s]")
    ax.set_ylabel(ylabel)
    ax.set_title(title)


def render(csv_paths, panel, out_path):
    """Draw one panel over the given CSVs and write a PNG."""
    if panel not in PANELS:
        raise ValueError("panel must be one of %s" % (PANELS,))
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    multi = len(csv_paths) > 1
    try:
        for path in csv_paths:
            header, cols = load_csv(path)
            if panel == "trajectory":
                _plot_trajectory(ax, path, header, cols)
            elif panel == "attitude":
                _plot_metric(ax, path, header, cols, "_err_att_deg",
                             "attitude error [deg]",
                             "attitude error vs time", multi)
            else:
                _plot_metric(ax, path, header, cols, "_err_pos_m",
                             "position error [m]",
                             "position error vs time", multi)
        handles, _ = ax.get_legend_handles_labels()
        if handles:
            ax.legend(loc="best")
        fig.tight_layout()
        # drop the writer's Software tag so output bytes are stable
        fig.savefig(out_path, format="png", metadata={"Software": None})
    finally:
        plt.close(fig)
