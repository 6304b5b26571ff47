"""A* and RRT* baselines, plus sequential multi-goal composition."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .env import Cell, OccupancyGrid
from .errors import InputError, NoPathError
from .symbolic import MOVES


def _goal_cells(grid: OccupancyGrid, label: str) -> frozenset:
    cells = grid.regions.get(label)
    if not cells:
        raise InputError(f"goal region {label!r} is empty or undefined")
    return frozenset(Cell(*c) for c in cells)


# ---------------------------------------------------------------- A*

def astar(grid: OccupancyGrid, start, goal_region: str) -> list[Cell]:
    """Minimum-length 4-connected cell path from ``start`` into ``goal_region``.

    The heuristic is the Manhattan distance to the nearest goal cell, which
    is admissible and consistent on unit-cost moves. Equal ``f`` values are
    expanded by larger ``g`` first, then in insertion order, so neighbours
    are tried up, down, left, right.
    """
    start = Cell(int(start[0]), int(start[1]))
    if not grid.in_bounds(start) or not grid.is_free(start):
        raise InputError(f"start cell {tuple(start)} is occupied or out of bounds")
    goals = [g for g in _goal_cells(grid, goal_region) if grid.is_free(g)]
    if not goals:
        raise NoPathError(f"goal region {goal_region!r} has no free cell")
    gi = np.array([g[0] for g in goals])
    gj = np.array([g[1] for g in goals])
    goal_set = set(goals)

    def h(c):
        return int(np.min(np.abs(gi - c[0]) + np.abs(gj - c[1])))

    tie = itertools.count()
    open_heap = [(h(start), 0, next(tie), start)]
    g_cost = {start: 0}
    parent = {start: None}
    closed = set()
    while open_heap:
        _, neg_g, _, cell = heapq.heappop(open_heap)
        if cell in closed:
            continue
        if cell in goal_set:
            path = []
            while cell is not None:
                path.append(cell)
                cell = parent[cell]
            return path[::-1]
        closed.add(cell)
        g = g_cost[cell]
        for di, dj in MOVES:
            nxt = Cell(cell[0] + di, cell[1] + dj)
            if not grid.is_free(nxt) or nxt in closed:
                continue
            if g + 1 < g_cost.get(nxt, math.inf):
                g_cost[nxt] = g + 1
                parent[nxt] = cell
                heapq.heappush(open_heap, (g + 1 + h(nxt), -(g + 1), next(tie), nxt))
    raise NoPathError(f"no path from {tuple(start)} to region {goal_region!r}")


# ---------------------------------------------------------------- RRT*

@dataclass
class RrtParams:
    max_iterations: int = 5000
    step_size: float | None = None  # default 0.5 * cell_size
    rewire_radius: float | None = None  # default 2 * cell_size
    goal_bias: float = 0.05
    rng_seed: int = 0

    def resolved(self, grid: OccupancyGrid) -> "RrtParams":
        p = RrtParams(
            self.max_iterations,
            0.5 * grid.cell_size if self.step_size is None else self.step_size,
            2.0 * grid.cell_size if self.rewire_radius is None else self.rewire_radius,
            self.goal_bias,
            self.rng_seed,
        )
        if not p.step_size > 0:
            raise InputError("step_size must be positive")
        if not 0.0 <= p.goal_bias <= 1.0:
            raise InputError("goal_bias must lie in [0, 1]")
        if p.max_iterations < 0:
            raise InputError("max_iterations must be nonnegative")
        if p.rewire_radius < 0:
            raise InputError("rewire_radius must be nonnegative")
        return p


@dataclass
class RrtResult:
    path: np.ndarray  # (n, 2) polyline from start to the goal
    cost: float
    cost_history: np.ndarray  # best goal cost after each iteration (inf before the first)
    nodes: np.ndarray
    parents: np.ndarray
    iterations: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def length(self) -> float:
        return polyline_length(self.path)


def polyline_length(points) -> float:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def segment_hits(p, q, rects: np.ndarray) -> np.ndarray:
    """Which rectangles' open interiors the segment ``p -> q`` passes through.

    Touching an edge or corner is not a hit. ``rects`` rows are
    ``(xmin, xmax, ymin, ymax)``.
    """
    if len(rects) == 0:
        return np.zeros(0, dtype=bool)
    p = np.asarray(p, dtype=float)
    d = np.asarray(q, dtype=float) - p
    lo = np.zeros(len(rects))
    hi = np.ones(len(rects))
    ok = np.ones(len(rects), dtype=bool)
    for axis, (a, b) in enumerate(((0, 1), (2, 3))):
        rmin, rmax = rects[:, a], rects[:, b]
        if d[axis] == 0.0:
            ok &= (p[axis] > rmin) & (p[axis] < rmax)
        else:
            t1 = (rmin - p[axis]) / d[axis]
            t2 = (rmax - p[axis]) / d[axis]
            lo = np.maximum(lo, np.minimum(t1, t2))
            hi = np.minimum(hi, np.maximum(t1, t2))
    return ok & (lo < hi)


def _point_free(pt, rects) -> bool:
    if len(rects) == 0:
        return True
    x, y = pt
    return not np.any((x > rects[:, 0]) & (x < rects[:, 1]) & (y > rects[:, 2]) & (y < rects[:, 3]))


def rrt_star(grid: OccupancyGrid, start, goal_region: str, params: RrtParams | None = None,
             rng: np.random.Generator | None = None) -> RrtResult:
    """RRT* from a world point to any point inside ``goal_region``.

    Runs all ``max_iterations`` and returns the cheapest node inside the
    goal region. Collision checks are exact segment/rectangle tests against
    obstacle interiors, so sliding along a wall is allowed. Deterministic for
    a fixed ``rng_seed`` (or a caller-supplied generator).
    """
    p = (params or RrtParams()).resolved(grid)
    rng = np.random.default_rng(p.rng_seed) if rng is None else rng
    rects = grid.obstacle_rectangles()
    start = np.asarray(start, dtype=float)
    if not grid.contains_point(start) or not _point_free(start, rects):
        raise InputError(f"start point {tuple(start)} is not in free space")
    if not grid.regions.get(goal_region):
        raise InputError(f"goal region {goal_region!r} is empty or undefined")
    goal_rects = grid.region_rectangles(goal_region)
    if len(goal_rects) == 0:
        raise InputError(f"goal region {goal_region!r} is empty or undefined")
    xmin, xmax, ymin, ymax = grid.extent

    def in_goal(pt):
        x, y = pt
        return bool(np.any((x >= goal_rects[:, 0]) & (x <= goal_rects[:, 1])
                           & (y >= goal_rects[:, 2]) & (y <= goal_rects[:, 3])))

    n_max = p.max_iterations + 1
    nodes = np.empty((n_max, 2))
    parents = np.full(n_max, -1, dtype=int)
    costs = np.empty(n_max)
    children: list[list[int]] = [[] for _ in range(n_max)]
    nodes[0] = start
    costs[0] = 0.0
    n = 1
    goal_nodes = [0] if in_goal(start) else []
    history = np.full(p.max_iterations, np.inf)
    best = 0.0 if goal_nodes else np.inf
    # goal cells weighted by area for biased samples
    areas = (goal_rects[:, 1] - goal_rects[:, 0]) * (goal_rects[:, 3] - goal_rects[:, 2])
    weights = areas / areas.sum()

    for it in range(p.max_iterations):
        if rng.random() < p.goal_bias:
            r = goal_rects[rng.choice(len(goal_rects), p=weights)]
            sample = np.array([rng.uniform(r[0], r[1]), rng.uniform(r[2], r[3])])
        else:
            sample = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
        d = np.linalg.norm(nodes[:n] - sample, axis=1)
        near_idx = int(np.argmin(d))
        dist = d[near_idx]
        if dist == 0.0:
            history[it] = best
            continue
        new = sample if dist <= p.step_size else nodes[near_idx] + (sample - nodes[near_idx]) * (p.step_size / dist)
        if not _point_free(new, rects) or segment_hits(nodes[near_idx], new, rects).any():
            history[it] = best
            continue
        dn = np.linalg.norm(nodes[:n] - new, axis=1)
        near = np.nonzero(dn <= p.rewire_radius)[0]
        parent, cost = near_idx, costs[near_idx] + dn[near_idx]
        checked = {near_idx: True}
        for k in near[np.argsort(costs[near] + dn[near], kind="stable")]:
            k = int(k)
            c = costs[k] + dn[k]
            if c >= cost:
                break
            free = not segment_hits(nodes[k], new, rects).any()
            checked[k] = free
            if free:
                parent, cost = k, c
                break
        idx = n
        nodes[idx] = new
        parents[idx] = parent
        costs[idx] = cost
        children[parent].append(idx)
        n += 1
        # rewire neighbours through the new node
        for k in near:
            k = int(k)
            if k == parent:
                continue
            c = cost + dn[k]
            if c < costs[k] - 1e-12:
                free = checked.get(k)
                if free is None:
                    free = not segment_hits(new, nodes[k], rects).any()
                if free:
                    children[parents[k]].remove(k)
                    parents[k] = idx
                    children[idx].append(k)
                    delta = costs[k] - c
                    stack = [k]
                    while stack:
                        m = stack.pop()
                        costs[m] -= delta
                        stack.extend(children[m])
        if in_goal(new):
            goal_nodes.append(idx)
        if goal_nodes:
            best = float(min(costs[g] for g in goal_nodes))
        history[it] = best

    if not goal_nodes:
        raise NoPathError(f"RRT* found no path to region {goal_region!r} in {p.max_iterations} iterations")
    g = min(goal_nodes, key=lambda k: (costs[k], k))
    path = []
    while g != -1:
        path.append(nodes[g])
        g = parents[g]
    return RrtResult(np.array(path[::-1]), float(costs[min(goal_nodes, key=lambda k: (costs[k], k))]),
                     history, nodes[:n].copy(), parents[:n].copy(), p.max_iterations)


# ---------------------------------------------------------------- composition

def plan_sequential(planner: Callable, grid: OccupancyGrid, start, goals: Sequence[str]):
    """Chain single-goal plans; each leg starts where the previous one ended.

    ``planner(grid, start, label)`` returns a sequence of waypoints (cells or
    points). Joints shared by consecutive legs appear once. A failing leg
    raises ``NoPathError`` naming its 1-based index and label.
    """
    if not goals:
        raise InputError("at least one goal is required")
    for label in goals:
        _goal_cells(grid, label)
    out: list = []
    cur = start
    for leg, label in enumerate(goals, start=1):
        try:
            seg = list(planner(grid, cur, label))
        except NoPathError as exc:
            raise NoPathError(f"leg {leg} ({label}): {exc}", leg=leg) from exc
        if out and np.array_equal(np.asarray(out[-1], dtype=float), np.asarray(seg[0], dtype=float)):
            seg = seg[1:]
        out.extend(seg)
        cur = out[-1]
    return out


def rrt_leg_planner(params: RrtParams | None = None) -> Callable:
    """Planner callable for ``plan_sequential``; leg ``n`` uses seed ``(rng_seed, n)``."""
    params = params or RrtParams()
    legs = itertools.count()

    def plan(grid, start, label):
        rng = np.random.default_rng([params.rng_seed, next(legs)])
        return list(rrt_star(grid, start, label, params, rng=rng).path)

    return plan
