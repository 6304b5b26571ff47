"""Wall-clearance and goal-reach robustness of planned trajectories."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .dynamics import Trajectory
from .env import OccupancyGrid, clearance_many, region_depth_many
from .errors import InputError
from .stl import Predicate, RobustnessResult, Signal, SAlways, conj, robustness, sequenced_reach


def trajectory_signal(traj: Trajectory, grid: OccupancyGrid, goal_regions: Sequence[str]) -> Signal:
    """Signals ``dist`` (wall clearance) and ``goal_<label>`` (signed depth in each goal region)."""
    pts = traj.positions
    if not all(grid.contains_point(p, tol=1e-9) for p in pts):
        raise InputError("trajectory leaves the map extent")
    xmin, xmax, ymin, ymax = grid.extent
    pts = np.column_stack([np.clip(pts[:, 0], xmin, xmax), np.clip(pts[:, 1], ymin, ymax)])
    cols = {"dist": clearance_many(pts, grid)}
    for g in goal_regions:
        if g not in grid.regions:
            raise InputError(f"unknown goal region {g!r}")
        cols[f"goal_{g}"] = region_depth_many(pts, grid, g)
    return Signal.from_columns(traj.times, **cols)


def verify_trajectory(traj: Trajectory, grid: OccupancyGrid, goal_regions: Sequence[str],
                      rho_min: float = 1.0) -> RobustnessResult:
    """Robustness of ``reach goals in order & alw (dist > 0)``.

    The safety conjunct's robustness is the minimum wall clearance along the
    trajectory. ``details`` carries the two conjuncts separately, the
    clearance trace and whether ``rho >= rho_min``.
    """
    if not rho_min > 0:
        raise InputError("rho_min must be positive")
    sig = trajectory_signal(traj, grid, goal_regions)
    safety = SAlways(Predicate((("dist", 1.0),), 0.0))
    parts = [safety]
    reach = None
    if goal_regions:
        reach = sequenced_reach([f"goal_{g}" for g in goal_regions])
        parts = [reach, safety]
    res = robustness(conj(*parts), sig)
    rho_safe = robustness(safety, sig).rho
    rho_reach = robustness(reach, sig).rho if reach is not None else np.inf
    res.details = {
        "rho_safety": rho_safe,
        "rho_reach": rho_reach,
        "clearance": sig.column("dist"),
        "meets_rho_min": res.rho >= rho_min,
    }
    return res
