"""Grid environment: occupancy, labeled regions and world-coordinate geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import InputError, MapParseError

OBSTACLE = "obstacle"


class Cell(NamedTuple):
    i: int  # column
    j: int  # row


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Binary grid world.

    ``occupancy[i, j]`` is True for obstacle cells. Cell ``(0, 0)`` has its
    lower-left corner at ``origin``; ``j`` grows upwards.
    """

    width: int
    height: int
    cell_size: float
    origin: tuple[float, float]
    occupancy: np.ndarray
    regions: dict[str, frozenset[Cell]] = field(default_factory=dict)

    def __post_init__(self):
        if self.cell_size <= 0:
            raise InputError(f"cell_size must be positive, got {self.cell_size}")
        if self.width <= 0 or self.height <= 0:
            raise InputError("width and height must be positive")
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.shape != (self.width, self.height):
            raise InputError(f"occupancy shape {occ.shape} != ({self.width}, {self.height})")
        occ = occ.copy()
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)

        regions = {}
        for label, cells in self.regions.items():
            if label == OBSTACLE:
                continue
            if not label or any(ch.isspace() for ch in label):
                raise InputError(f"invalid region label {label!r}")
            cells = frozenset(Cell(int(c[0]), int(c[1])) for c in cells)
            for c in sorted(cells):
                if not self.in_bounds(c):
                    raise InputError(f"region {label!r} cell {tuple(c)} out of bounds")
                if occ[c]:
                    raise InputError(
                        f"goal region intersects obstacle: region {label!r} at cell {tuple(c)}"
                    )
            regions[label] = cells
        regions[OBSTACLE] = frozenset(Cell(int(i), int(j)) for i, j in zip(*np.nonzero(occ)))
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "_rects", _merge_rectangles(occ))

    def in_bounds(self, cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def is_free(self, cell) -> bool:
        return self.in_bounds(cell) and not self.occupancy[cell[0], cell[1]]

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax) in meters."""
        ox, oy = self.origin
        return (ox, ox + self.width * self.cell_size, oy, oy + self.height * self.cell_size)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width * self.cell_size, self.height * self.cell_size)

    def labels(self) -> list[str]:
        """Goal/region labels other than the obstacle label, sorted."""
        return sorted(k for k in self.regions if k != OBSTACLE)

    def cell_rect(self, cell) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        s = self.cell_size
        return (ox + cell[0] * s, ox + (cell[0] + 1) * s, oy + cell[1] * s, oy + (cell[1] + 1) * s)

    def obstacle_rectangles(self) -> np.ndarray:
        """Occupied cells merged into axis-aligned rectangles.

        Returns an ``(n, 4)`` array of ``(xmin, xmax, ymin, ymax)`` in meters.
        The union of the rectangles is exactly the occupied area.
        """
        ox, oy = self.origin
        s = self.cell_size
        r = self._rects
        if len(r) == 0:
            return np.zeros((0, 4))
        return np.column_stack([ox + r[:, 0] * s, ox + r[:, 1] * s, oy + r[:, 2] * s, oy + r[:, 3] * s])

    def region_rectangles(self, label: str) -> np.ndarray:
        cells = sorted(self.regions[label])
        return np.array([self.cell_rect(c) for c in cells]).reshape(-1, 4)

    def contains_point(self, point, tol: float = 0.0) -> bool:
        xmin, xmax, ymin, ymax = self.extent
        return xmin - tol <= point[0] <= xmax + tol and ymin - tol <= point[1] <= ymax + tol


def _merge_rectangles(occ: np.ndarray) -> np.ndarray:
    """Greedy decomposition of occupied cells into maximal row-runs stacked vertically.

    Rows are returned as ``(i0, i1, j0, j1)`` cell-index bounds, half-open.
    """
    w, h = occ.shape
    used = np.zeros_like(occ)
    rects = []
    for j in range(h):
        i = 0
        while i < w:
            if not occ[i, j] or used[i, j]:
                i += 1
                continue
            i1 = i
            while i1 < w and occ[i1, j] and not used[i1, j]:
                i1 += 1
            j1 = j + 1
            while j1 < h and occ[i:i1, j1].all() and not used[i:i1, j1].any():
                j1 += 1
            used[i:i1, j:j1] = True
            rects.append((i, i1, j, j1))
            i = i1
    return np.array(rects, dtype=float).reshape(-1, 4)


def parse_map(text: str) -> OccupancyGrid:
    header: dict[str, object] = {}
    obstacles: list[tuple[int, int, int]] = []
    regions: dict[str, list[tuple[int, int, int]]] = {}

    def _int(tok, lineno, what):
        try:
            return int(tok)
        except ValueError:
            raise MapParseError(f"{what}: expected integer, got {tok!r}", lineno) from None

    def _float(tok, lineno, what):
        try:
            val = float(tok)
        except ValueError:
            raise MapParseError(f"{what}: expected number, got {tok!r}", lineno) from None
        if not math.isfinite(val):
            raise MapParseError(f"{what}: non-finite value {tok!r}", lineno)
        return val

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        key = toks[0]
        if key in ("width", "height"):
            if len(toks) != 2:
                raise MapParseError(f"{key} takes one value", lineno)
            header[key] = _int(toks[1], lineno, key)
        elif key == "cell_size":
            if len(toks) != 2:
                raise MapParseError("cell_size takes one value", lineno)
            header[key] = _float(toks[1], lineno, key)
        elif key == "origin":
            if len(toks) != 3:
                raise MapParseError("origin takes two values", lineno)
            header[key] = (_float(toks[1], lineno, "origin x"), _float(toks[2], lineno, "origin y"))
        elif key == "obstacle":
            if len(toks) != 3:
                raise MapParseError("obstacle takes two cell indices", lineno)
            obstacles.append((_int(toks[1], lineno, "obstacle i"), _int(toks[2], lineno, "obstacle j"), lineno))
        elif key == "region":
            if len(toks) != 4:
                raise MapParseError("region takes a label and two cell indices", lineno)
            regions.setdefault(toks[1], []).append(
                (_int(toks[2], lineno, "region i"), _int(toks[3], lineno, "region j"), lineno)
            )
        else:
            raise MapParseError(f"unknown directive {key!r}", lineno)

    for key in ("width", "height", "cell_size"):
        if key not in header:
            raise MapParseError(f"missing header field {key!r}")
    width, height = header["width"], header["height"]
    if width <= 0 or height <= 0:
        raise MapParseError("width and height must be positive")
    if header["cell_size"] <= 0:
        raise MapParseError("cell_size must be positive")

    occ = np.zeros((width, height), dtype=bool)
    for i, j, lineno in obstacles + regions.pop(OBSTACLE, []):
        if not (0 <= i < width and 0 <= j < height):
            raise MapParseError(f"obstacle cell ({i}, {j}) out of bounds", lineno)
        occ[i, j] = True

    cells_by_label = {}
    for label, entries in regions.items():
        for i, j, lineno in entries:
            if not (0 <= i < width and 0 <= j < height):
                raise MapParseError(f"region {label!r} cell ({i}, {j}) out of bounds", lineno)
            if occ[i, j]:
                raise MapParseError(
                    f"goal region intersects obstacle: region {label!r} at cell ({i}, {j})", lineno
                )
        cells_by_label[label] = frozenset(Cell(i, j) for i, j, _ in entries)

    return OccupancyGrid(
        width=width,
        height=height,
        cell_size=header["cell_size"],
        origin=header.get("origin", (0.0, 0.0)),
        occupancy=occ,
        regions=cells_by_label,
    )


def load_map(path) -> OccupancyGrid:
    """Read a map file. See ``parse_map`` for the format."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read map {path}: {exc}") from exc
    return parse_map(text)


def dump_map(grid: OccupancyGrid) -> str:
    lines = [
        f"width {grid.width}",
        f"height {grid.height}",
        f"cell_size {grid.cell_size!r}",
        f"origin {grid.origin[0]!r} {grid.origin[1]!r}",
    ]
    for c in sorted(grid.regions[OBSTACLE]):
        lines.append(f"obstacle {c.i} {c.j}")
    for label in grid.labels():
        for c in sorted(grid.regions[label]):
            lines.append(f"region {label} {c.i} {c.j}")
    return "\n".join(lines) + "\n"


def cell_to_world(cell, grid: OccupancyGrid) -> tuple[float, float]:
    if not grid.in_bounds(cell):
        raise InputError(f"cell {tuple(cell)} out of bounds")
    ox, oy = grid.origin
    return (ox + (cell[0] + 0.5) * grid.cell_size, oy + (cell[1] + 0.5) * grid.cell_size)


def world_to_cell(point, grid: OccupancyGrid) -> Cell:
    if not grid.contains_point(point):
        raise InputError(f"point {tuple(point)} outside map extent")
    ox, oy = grid.origin
    i = math.floor((point[0] - ox) / grid.cell_size)
    j = math.floor((point[1] - oy) / grid.cell_size)
    return Cell(min(i, grid.width - 1), min(j, grid.height - 1))


def _rect_distance(px, py, rects):
    """Euclidean distance from points to rectangles, broadcast as (points, rects)."""
    px = np.asarray(px, dtype=float)[..., None]
    py = np.asarray(py, dtype=float)[..., None]
    dx = np.maximum(np.maximum(rects[:, 0] - px, px - rects[:, 1]), 0.0)
    dy = np.maximum(np.maximum(rects[:, 2] - py, py - rects[:, 3]), 0.0)
    return np.hypot(dx, dy)


def clearance_many(points, grid: OccupancyGrid) -> np.ndarray:
    """Vectorized ``clearance`` over an ``(n, 2)`` array of points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    xmin, xmax, ymin, ymax = grid.extent
    if np.any((pts[:, 0] < xmin) | (pts[:, 0] > xmax) | (pts[:, 1] < ymin) | (pts[:, 1] > ymax)):
        raise InputError("point outside map extent")
    rects = grid.obstacle_rectangles()
    if len(rects) == 0:
        return np.minimum.reduce([pts[:, 0] - xmin, xmax - pts[:, 0], pts[:, 1] - ymin, ymax - pts[:, 1]])
    return _rect_distance(pts[:, 0], pts[:, 1], rects).min(axis=1)


def clearance(point, grid: OccupancyGrid) -> float:
    """Distance in meters from ``point`` to the nearest occupied area.

    Zero inside or on the edge of an occupied cell. A map without any
    obstacle uses its outer boundary as the wall.
    """
    return float(clearance_many([point], grid)[0])


def region_depth_many(points, grid: OccupancyGrid, label: str) -> np.ndarray:
    """Signed distance to the boundary of a labeled region, positive inside."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    inside_rects = grid.region_rectangles(label)
    if len(inside_rects) == 0:
        return np.full(len(pts), -np.inf)
    d_in = _rect_distance(pts[:, 0], pts[:, 1], inside_rects).min(axis=1)
    # Distance to the complement: every non-region cell plus the area outside the map.
    members = np.zeros((grid.width, grid.height), dtype=bool)
    for c in grid.regions[label]:
        members[c] = True
    ox, oy = grid.origin
    s = grid.cell_size
    ii, jj = np.nonzero(~members)
    out_rects = np.column_stack([ox + ii * s, ox + (ii + 1) * s, oy + jj * s, oy + (jj + 1) * s])
    xmin, xmax, ymin, ymax = grid.extent
    d_edge = np.minimum.reduce([pts[:, 0] - xmin, xmax - pts[:, 0], pts[:, 1] - ymin, ymax - pts[:, 1]])
    d_out = np.maximum(d_edge, 0.0)
    if len(out_rects):
        d_out = np.minimum(d_out, _rect_distance(pts[:, 0], pts[:, 1], out_rects).min(axis=1))
    return np.where(d_in > 0.0, -d_in, d_out)


def region_labels(cell, grid: OccupancyGrid) -> frozenset[str]:
    if not grid.in_bounds(cell):
        raise InputError(f"cell {tuple(cell)} out of bounds")
    cell = Cell(int(cell[0]), int(cell[1]))
    return frozenset(label for label, cells in grid.regions.items() if cell in cells)
