"""Deterministic SVG plots of fields, trajectories, costs and residuals."""

from __future__ import annotations

import os

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .verify import HIST_EDGES

FIGSIZE = (6.4, 4.8)
CMAP = "viridis"
QUANTILES = np.linspace(0.0, 1.0, 11)
_RC = {"svg.hashsalt": "mrfkit", "svg.fonttype": "none", "path.simplify": False}


def _save(fig, path):
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def _segment_marks(rec):
    """Times of the level-halving events along a record's trajectory."""
    return np.cumsum([s.duration for s in rec.segments if s.complete])


def plot_field(field, path, records=(), system=None):
    """1D curve (target band shaded) or 2D filled contours at fixed quantile levels."""
    g = field.grid
    fig = Figure(figsize=FIGSIZE)
    ax = fig.add_subplot()
    if g.ndim == 1:
        x = g.axes[0]
        ax.plot(x, field.values.ravel(), color="C0", lw=1.5, label="W")
        mask = field.target_mask.ravel()
        if np.any(mask):
            ax.axvspan(x[mask].min(), x[mask].max(), color="0.85", label="target band")
        for k, rec in enumerate(records):
            traj = rec.trajectory
            ax.plot(traj.states[:, 0], field.sample(traj.states), color="C3", lw=0.8,
                    alpha=0.6, label="trajectories" if k == 0 else None)
            ends = np.interp(_segment_marks(rec), traj.times, traj.states[:, 0])
            ax.plot(ends, field.sample(ends[:, None]), "k.", ms=3)
        ax.set_xlabel("x")
        ax.set_ylabel("W(x)")
        ax.legend(loc="upper center")
    else:
        x, y = g.axes
        vals = field.values.reshape(g.shape)
        finite = vals[np.isfinite(vals)]
        levels = np.unique(np.quantile(finite, QUANTILES))
        if levels.size < 2:
            levels = np.array([finite.min(), finite.min() + 1.0])
        cs = ax.contourf(x, y, vals.T, levels=levels, cmap=CMAP)
        fig.colorbar(cs, ax=ax, label="W")
        for rec in records:
            traj = rec.trajectory
            ax.plot(traj.states[:, 0], traj.states[:, 1], color="w", lw=0.8)
            marks = _segment_marks(rec)
            pts = traj.state_at(marks) if marks.size else np.empty((0, 2))
            ax.plot(pts[:, 0], pts[:, 1], "r.", ms=3)
        if system == "double_integrator_mintime":
            v = np.linspace(y[0], y[-1], 201)
            sw = -0.5 * v * np.abs(v)
            keep = (sw >= x[0]) & (sw <= x[-1])
            ax.plot(sw[keep], v[keep], "k--", lw=1.0, label="switching curve")
            ax.legend(loc="upper right")
        ax.set_xlabel("x0")
        ax.set_ylabel("x1")
    return _save(fig, path)


def plot_costs(d, cost, bound, path):
    """Accumulated cost and certified bound against the start distance."""
    fig = Figure(figsize=FIGSIZE)
    ax = fig.add_subplot()
    d = np.asarray(d, dtype=float)
    order = np.argsort(d, kind="stable")
    cost = np.asarray(cost, dtype=float)[order]
    bound = np.asarray(bound, dtype=float)[order]
    ax.plot(d[order], bound, color="C1", lw=1.5, label="bound 4 P(W/2)")
    ax.plot(d[order], cost, "o", color="C0", ms=3, label="synthesized cost")
    ax.set_xlabel("d(z)")
    ax.set_ylabel("cost")
    ax.legend(loc="upper left")
    return _save(fig, path)


def plot_histogram(counts, path):
    """Decrease residual counts over the fixed report bins."""
    fig = Figure(figsize=FIGSIZE)
    ax = fig.add_subplot()
    labels = [f"{a:g}..{b:g}" for a, b in zip(HIST_EDGES[:-1], HIST_EDGES[1:])]
    ax.bar(np.arange(len(counts)), counts, color="C2")
    ax.set_xticks(np.arange(len(counts)))
    ax.set_xticklabels(labels, rotation=60, fontsize=7)
    ax.set_ylabel("nodes")
    fig.subplots_adjust(bottom=0.3)
    return _save(fig, path)


def emit_plots(artifacts, output_dir):
    """Write the SVGs available from ``artifacts``; returns the file list.

    Fields of dimension above 2 are skipped with a notice.
    """
    os.makedirs(output_dir, exist_ok=True)
    files = []
    records = artifacts.get("records") or []
    field = artifacts.get("field")
    name = artifacts.get("system")
    if field is not None:
        if field.grid.ndim > 2:
            print(f"notice: plots skipped for a {field.grid.ndim}-dimensional field")
        else:
            files.append(plot_field(field, os.path.join(output_dir, "field.svg"), records, name))
    distance = artifacts.get("distance")
    if records and distance is not None:
        d = [float(distance(np.asarray(r.start))) for r in records]
        files.append(plot_costs(d, [r.trajectory.total_cost for r in records],
                                [r.cost_bound for r in records],
                                os.path.join(output_dir, "costs.svg")))
    if artifacts.get("histogram") is not None:
        files.append(plot_histogram(artifacts["histogram"],
                                    os.path.join(output_dir, "residuals.svg")))
    conv = artifacts.get("converse")
    if conv is not None and conv.V.grid.ndim <= 2:
        files.append(plot_field(conv.V, os.path.join(output_dir, "converse_field.svg"), (), name))
    return files


def plots_from_directory(output_dir):
    """Re-render plots from the CSV artifacts of an earlier run."""
    from .grid import read_field_csv
    from .pipeline import read_table

    files = []
    path = os.path.join(output_dir, "field.csv")
    if os.path.exists(path):
        field = read_field_csv(path)
        if field.grid.ndim > 2:
            print(f"notice: plots skipped for a {field.grid.ndim}-dimensional field")
        else:
            files.append(plot_field(field, os.path.join(output_dir, "field.svg"), (),
                                    field.meta.get("system")))
    path = os.path.join(output_dir, "residuals.csv")
    if os.path.exists(path):
        _, rows = read_table(path)
        res = np.array([float(r[-1]) for r in rows])
        counts, _ = np.histogram(res[np.isfinite(res)], bins=HIST_EDGES)
        files.append(plot_histogram(counts, os.path.join(output_dir, "residuals.svg")))
    path = os.path.join(output_dir, "synthesis.csv")
    if os.path.exists(path) and os.path.exists(os.path.join(output_dir, "field.csv")):
        head, rows = read_table(path)
        col = {k: i for i, k in enumerate(head)}
        from .systems import make_system

        name = read_field_csv(os.path.join(output_dir, "field.csv")).meta.get("system")
        if rows and name:
            system = make_system(name)
            d = [float(system.distance(np.array([float(v) for v in r[col["start"]].split()])))
                 for r in rows]
            files.append(plot_costs(d, [float(r[col["cost"]]) for r in rows],
                                    [float(r[col["cost_bound"]]) for r in rows],
                                    os.path.join(output_dir, "costs.svg")))
    return files
