"""SVG figures for trajectories, phase planes, density snapshots and convergence tables.

Figures are drawn on a bare ``Figure`` (no pyplot state) and saved with a
fixed hash salt and no date stamp, so identical input gives identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib.backends.backend_svg import FigureCanvasSVG  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

KINDS = ("lines", "phasePlane", "densitySnapshots", "loglog")

_STYLE = {
    "svg.hashsalt": "pollinet",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
}


def _save(fig, path):
    FigureCanvasSVG(fig)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "pollinet"})


def _lines(ax, data, logx=False, logy=False):
    for s in data.get("series", []):
        x, y = np.asarray(s["x"], float), np.asarray(s["y"], float)
        style = s.get("style", "-o" if logx else "-")
        ax.plot(x, y, style, label=s.get("label"), markersize=3)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(data.get("xlabel", ""))
    ax.set_ylabel(data.get("ylabel", ""))
    if data.get("title"):
        ax.set_title(data["title"])
    if any(s.get("label") for s in data.get("series", [])):
        ax.legend(frameon=False)


def _phase(ax, data):
    colours = {"plant": "c", "pollinator": "b"}
    for nc in data.get("nullclines", []):
        ax.plot(nc["P"], nc["A"], color=colours.get(nc.get("species"), "k"), label=nc.get("label"))
    for tr in data.get("trajectories", []):
        ax.plot(tr["P"], tr["A"], color="0.6", linewidth=0.6)
    marker = {"stable": ("o", "k"), "unstable": ("o", "w"), "nonHyperbolic": ("s", "0.5")}
    for eq in data.get("equilibria", []):
        m, face = marker.get(eq["stability"], ("x", "k"))
        ax.plot([eq["P"]], [eq["A"]], m, markerfacecolor=face, markeredgecolor="k", markersize=6)
    ax.set_xlabel("plants P")
    ax.set_ylabel("pollinators A")
    if data.get("title"):
        ax.set_title(data["title"])
    if data.get("nullclines"):
        ax.legend(frameon=False)


def _density(axes, data):
    x = np.asarray(data.get("x", []), float)
    for side, ax, name in (("p", axes[0], "plants"), ("a", axes[1], "pollinators")):
        for k, snap in enumerate(data.get("snapshots", [])):
            ax.plot(x, np.asarray(snap[side], float), color=f"C{k}", label=f"t = {snap['t']:g}")
        if data.get("log", True) and data.get("snapshots"):
            ax.set_yscale("log")
        ax.set_xlabel("trait")
        ax.set_title(name)
        if data.get("snapshots"):
            ax.legend(frameon=False)


def emit_plot(kind, data, path):
    """Render ``data`` as figure ``kind`` into the SVG file ``path``."""
    if kind not in KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {KINDS}")
    with matplotlib.rc_context(_STYLE):
        if kind == "densitySnapshots":
            fig = Figure(figsize=(8, 3.2))
            axes = fig.subplots(1, 2)
            _density(axes, data)
        else:
            fig = Figure(figsize=(5, 3.6))
            ax = fig.subplots()
            if kind == "lines":
                _lines(ax, data)
            elif kind == "loglog":
                _lines(ax, data, logx=True, logy=True)
            else:
                _phase(ax, data)
        fig.tight_layout()
        _save(fig, path)
    return path
