"""SVG figures: map with planned paths, and wall-clearance curves over time.

Each plotted trajectory is a single line whose SVG group id is
``trajectory-<name>``. Output is byte-stable across runs.
"""

from __future__ import annotations

import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .env import OBSTACLE, OccupancyGrid  # noqa: E402

_RC = {"svg.hashsalt": "tlnav", "svg.fonttype": "none", "path.simplify": False}
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def slug(name: str) -> str:
    s = name.lower().replace("*", "star").replace("+", "plus")
    return re.sub(r"[^a-z0-9]+", "-", s).strip("-")


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def _draw_map(ax, grid: OccupancyGrid):
    xmin, xmax, ymin, ymax = grid.extent
    for x0, x1, y0, y1 in grid.obstacle_rectangles():
        ax.add_patch(Rectangle((x0, y0), x1 - x0, y1 - y0, facecolor="0.35", edgecolor="none"))
    for label in sorted(grid.regions):
        if label == OBSTACLE:
            continue
        for x0, x1, y0, y1 in grid.region_rectangles(label):
            ax.add_patch(Rectangle((x0, y0), x1 - x0, y1 - y0, facecolor="#ffd54f", edgecolor="#b28704"))
            ax.text((x0 + x1) / 2, (y0 + y1) / 2, label, ha="center", va="center", fontsize=8)
    ax.set_xlim(xmin, xmax)
    ax.set_ylim(ymin, ymax)
    ax.set_aspect("equal")
    ax.set_xticks([xmin + k * grid.cell_size for k in range(grid.width + 1)], minor=True)
    ax.set_yticks([ymin + k * grid.cell_size for k in range(grid.height + 1)], minor=True)
    ax.grid(which="minor", color="0.85", linewidth=0.5)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")


def plot_paths(grid: OccupancyGrid, paths: dict, path, title: str = "") -> Path:
    """Map with obstacles shaded, goals labeled and one polyline per entry of ``paths``."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 7 * grid.height / max(grid.width, 1) + 0.5))
        _draw_map(ax, grid)
        for n, (name, pts) in enumerate(paths.items()):
            ax.plot(pts[:, 0], pts[:, 1], color=COLORS[n % len(COLORS)], linewidth=1.5, label=name,
                    gid=f"trajectory-{slug(name)}")
        if paths:
            ax.legend(loc="upper right", fontsize=8)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_robustness(curves: dict, path, rho_min: float | None = None, title: str = "") -> Path:
    """Wall clearance over time, one curve per planner, with the ``rho_min`` threshold dashed."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4))
        for n, (name, (t, rho)) in enumerate(curves.items()):
            ax.plot(t, rho, color=COLORS[n % len(COLORS)], linewidth=1.5, label=name,
                    gid=f"trajectory-{slug(name)}")
        if rho_min is not None:
            ax.axhline(rho_min, color="k", linestyle="--", linewidth=1.0, label="rho_min", gid="threshold")
        ax.set_xlabel("t (s)")
        ax.set_ylabel("distance to nearest wall (m)")
        ax.legend(loc="best", fontsize=8)
        if title:
            ax.set_title(title)
        return _save(fig, path)
