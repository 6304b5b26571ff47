"""Planner runs shared by the CLI: plan, track, verify and the four-way comparison."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import RrtParams, astar, plan_sequential, rrt_leg_planner
from .dynamics import Trajectory, simulate_unicycle, unicycle_from_linear
from .env import OccupancyGrid, cell_to_world, dump_map, region_labels, world_to_cell
from .errors import InputError, TlnavError
from .ltl import LtlFormula
from .report import PlannerReport
from .symbolic import TransitionSystem, build_transition_system, plan_path, witness_goals
from .tracking import (
    TrackingParams,
    TrackingResult,
    build_reference,
    constant_speed_traversal,
    path_cost,
    solve_tracking,
    traversal_speed,
)
from .verify import verify_trajectory

log = logging.getLogger(__name__)

PLANNERS = ("ltl", "milp", "astar", "rrtstar")
DISPLAY = {"ltl": "LTL", "milp": "LTL + MILP", "astar": "A*", "rrtstar": "RRT*"}

# Built transition systems keyed by map content; a map is only compiled once per process.
_TS_CACHE: dict[str, TransitionSystem] = {}


def transition_system(grid: OccupancyGrid, start) -> TransitionSystem:
    key = dump_map(grid)
    ts = _TS_CACHE.get(key)
    if ts is None:
        ts = build_transition_system(grid, start)
        _TS_CACHE[key] = ts
    return ts.with_initial(start)


def traversal_trajectory(points, speed: float, ts: float) -> Trajectory:
    """Constant-speed, rest-to-rest traversal of a polyline as a linear-state trajectory."""
    pos, acc = constant_speed_traversal(points, speed, ts)
    vel = np.vstack([np.zeros((1, 2)), np.diff(pos, axis=0) / ts])
    times = ts * np.arange(len(pos))
    return Trajectory(times, np.hstack([pos, vel]), kind="linear", controls=acc[: len(pos) - 1])


@dataclass
class PlannerRun:
    key: str
    report: PlannerReport
    trajectory: Trajectory | None = None
    path: np.ndarray | None = None
    robustness: object = None
    extra: dict = field(default_factory=dict)


@dataclass
class Instance:
    grid: OccupancyGrid
    phi: LtlFormula
    start: tuple[int, int]
    params: TrackingParams
    seed: int = 0
    trace: list | None = None
    goals: list[str] | None = None
    plan_time: float = 0.0

    def plan(self):
        """Symbolic plan, computed once; also fixes the goal order the spec needs."""
        if self.trace is None:
            t0 = time.perf_counter()
            ts = transition_system(self.grid, self.start)
            self.trace = plan_path(self.grid, self.phi, self.start, ts=ts)
            self.plan_time = time.perf_counter() - t0
            self.goals = witness_goals(self.phi, [region_labels(c, self.grid) for c in self.trace])
        return self.trace

    def reference(self):
        return build_reference(self.plan(), self.grid, self.params)


def _verify(run: PlannerRun, inst: Instance) -> PlannerRun:
    rob = verify_trajectory(run.trajectory, inst.grid, inst.goals, inst.params.rho_min)
    run.robustness = rob
    run.report.rho = rob.rho
    return run


def run_ltl(inst: Instance) -> PlannerRun:
    trace = inst.plan()
    pts = np.array([cell_to_world(c, inst.grid) for c in trace])
    traj = traversal_trajectory(pts, traversal_speed(inst.grid, inst.params), inst.params.ts)
    run = PlannerRun("ltl", PlannerReport(DISPLAY["ltl"], None, inst.plan_time), traj, pts)
    return _verify(run, inst)


def run_milp(inst: Instance) -> PlannerRun:
    trace = inst.plan()
    t0 = time.perf_counter()
    res: TrackingResult = solve_tracking(inst.grid, trace, params=inst.params, goal_regions=inst.goals,
                                         name=DISPLAY["milp"])
    wall = inst.plan_time + time.perf_counter() - t0
    report = PlannerReport(DISPLAY["milp"], res.report.rho, wall, res.objective)
    run = PlannerRun("milp", report, res.trajectory, res.trajectory.positions, res.robustness)
    run.extra["tracking"] = res
    return run


def unicycle_rollout(res: TrackingResult, params: TrackingParams) -> Trajectory:
    """Drive the unicycle with the MILP accelerations through the feedback linearization."""
    x0 = res.trajectory.states[0]
    heading = 0.0
    if len(res.reference.waypoints) > 1:
        d = res.reference.waypoints[1] - res.reference.waypoints[0]
        heading = float(np.arctan2(d[1], d[0]))
    return simulate_unicycle(unicycle_from_linear(x0, params.v0, heading), res.controls, params.ts)


def _baseline(inst: Instance, key: str, planner, start) -> PlannerRun:
    inst.plan()
    t0 = time.perf_counter()
    path = plan_sequential(planner, inst.grid, start, inst.goals)
    wall = time.perf_counter() - t0
    if key == "astar":
        pts = np.array([cell_to_world(c, inst.grid) for c in path])
    else:
        pts = np.asarray(path, dtype=float).reshape(-1, 2)
    traj = traversal_trajectory(pts, traversal_speed(inst.grid, inst.params), inst.params.ts)
    cost = path_cost(pts, inst.reference(), inst.grid, inst.params)
    run = PlannerRun(key, PlannerReport(DISPLAY[key], None, wall, cost), traj, pts)
    return _verify(run, inst)


def run_astar(inst: Instance) -> PlannerRun:
    return _baseline(inst, "astar", astar, inst.start)


def run_rrtstar(inst: Instance, rrt: RrtParams | None = None) -> PlannerRun:
    rrt = rrt or RrtParams(rng_seed=inst.seed)
    return _baseline(inst, "rrtstar", rrt_leg_planner(rrt), cell_to_world(inst.start, inst.grid))


RUNNERS = {"ltl": run_ltl, "milp": run_milp, "astar": run_astar, "rrtstar": run_rrtstar}


def compare(inst: Instance, planners=PLANNERS) -> list[PlannerRun]:
    """Run each planner; a failing planner becomes a row with its status and the rest continue."""
    inst.plan()
    runs = []
    for key in planners:
        if key not in RUNNERS:
            raise InputError(f"unknown planner {key!r}")
        t0 = time.perf_counter()
        try:
            runs.append(RUNNERS[key](inst))
        except TlnavError as exc:
            status = "no path" if getattr(exc, "exit_code", None) == 3 else "error"
            log.warning("%s failed: %s", DISPLAY[key], exc)
            runs.append(PlannerRun(key, PlannerReport(DISPLAY[key], None, time.perf_counter() - t0,
                                                      status=status), extra={"error": str(exc)}))
    return runs


def verify_positions(positions, ts: float, grid: OccupancyGrid, phi: LtlFormula, rho_min: float):
    """Robustness of a recorded position sequence against ``phi``'s goals and the walls.

    The goal order comes from the cells the positions pass through.
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    cells = []
    for p in pos:
        c = world_to_cell(p, grid)
        if not cells or cells[-1] != c:
            cells.append(c)
    goals = witness_goals(phi, [region_labels(c, grid) for c in cells])
    vel = np.vstack([np.zeros((1, 2)), np.diff(pos, axis=0) / ts]) if len(pos) else np.zeros((0, 2))
    traj = Trajectory(ts * np.arange(len(pos)), np.hstack([pos, vel]))
    return verify_trajectory(traj, grid, goals, rho_min), goals
