"""Reference-tracking MILP with obstacle clearance, and the robustness loop around it."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import LinearState, Trajectory, discretize_double_integrator, simulate_linear
from .env import OccupancyGrid, cell_to_world
from .errors import InfeasibleError, InputError
from .milp import MilpBuilder, MilpProblem, SolveOptions, Status, solve
from .report import PlannerReport
from .verify import verify_trajectory

log = logging.getLogger(__name__)

FACES = ("left", "right", "bottom", "top")


@dataclass
class TrackingParams:
    q1: float = 1.0
    q2: float = 10.0
    horizon: int | None = None
    ts: float = 0.1
    u_min: float = -4.0
    u_max: float = 4.0
    v_max: float = 4.0
    rho_min: float = 1.0
    samples_per_cell: int = 15
    big_M: float | None = None
    tight_big_m: bool = True
    max_outer_iters: int = 5
    rho_step: float = 0.1
    v0: float = 0.1
    corner_margin: float | None = None  # default v_max * ts / 2
    lp_method: str = "highs"
    abs_gap: float = 1e-6
    time_limit: float | None = 120.0
    max_lazy_rounds: int = 50

    def validate(self, grid: OccupancyGrid | None = None) -> "TrackingParams":
        if self.q1 < 0 or self.q2 < 0 or (self.q1 == 0 and self.q2 == 0):
            raise InputError("weights must be nonnegative and not both zero")
        if self.horizon is not None and self.horizon < 2:
            raise InputError("horizon must be at least 2")
        if not self.ts > 0:
            raise InputError("ts must be positive")
        if self.u_min >= self.u_max:
            raise InputError("u_min must be below u_max")
        if self.samples_per_cell < 1:
            raise InputError("samples_per_cell must be >= 1")
        if not self.rho_min > 0:
            raise InputError("rho_min must be positive")
        if self.v_max <= 0:
            raise InputError("v_max must be positive")
        if grid is not None and self.big_M is not None and self.big_M <= grid.diagonal:
            raise InputError(f"big_M {self.big_M} must exceed the map diagonal {grid.diagonal:.3f}")
        return self

    def margin(self) -> float:
        extra = self.v_max * self.ts / 2 if self.corner_margin is None else self.corner_margin
        return self.rho_min + extra

    def big_m_for(self, grid: OccupancyGrid) -> float:
        return self.big_M if self.big_M is not None else grid.diagonal + self.rho_min + 1.0


@dataclass
class ReferenceSignal:
    points: np.ndarray  # (H, 2)
    waypoints: np.ndarray
    samples_per_cell: int

    @property
    def horizon(self) -> int:
        return len(self.points)


def build_reference(trace, grid: OccupancyGrid, params: TrackingParams) -> ReferenceSignal:
    """Hold each cell center for ``samples_per_cell`` steps; pad with the last one up to H."""
    if len(trace) == 0:
        raise InputError("empty trace")
    wps = np.array([cell_to_world(c, grid) for c in trace])
    spc = params.samples_per_cell
    H = params.horizon if params.horizon is not None else len(trace) * spc
    if H < len(trace):
        raise InputError(f"horizon {H} shorter than trace length {len(trace)}")
    if H >= len(trace) * spc:
        holds = [spc] * len(trace)
        holds[-1] += H - len(trace) * spc
    else:
        base, extra = divmod(H, len(trace))
        holds = [base + (1 if k < extra else 0) for k in range(len(trace))]
    pts = np.repeat(wps, holds, axis=0)
    return ReferenceSignal(pts, wps, spc)


def _inflated(rects: np.ndarray, m: float) -> np.ndarray:
    return rects + np.array([-m, m, -m, m])


def _inside(points: np.ndarray, boxes: np.ndarray, tol: float = 1e-7) -> np.ndarray:
    """(n, r) mask: point strictly inside box by more than ``tol``."""
    x = points[:, 0:1]
    y = points[:, 1:2]
    return (x > boxes[:, 0] + tol) & (x < boxes[:, 1] - tol) & (y > boxes[:, 2] + tol) & (y < boxes[:, 3] - tol)


def initial_state(trace, grid: OccupancyGrid, params: TrackingParams) -> LinearState:
    """Start-cell center, moving at ``v0`` toward the second waypoint."""
    p0 = cell_to_world(trace[0], grid)
    if len(trace) > 1:
        p1 = cell_to_world(trace[1], grid)
        heading = math.atan2(p1[1] - p0[1], p1[0] - p0[0])
    else:
        heading = 0.0
    return LinearState(p0[0], p0[1], params.v0 * math.cos(heading), params.v0 * math.sin(heading))


def goal_targets(trace, grid: OccupancyGrid, goal_regions, ref: ReferenceSignal, depth: float):
    """Step and box where the vehicle must be for each goal, visited in order.

    The step is the last sample the reference holds on the trace's first cell
    of that goal (after the previous goal); the box is that cell shrunk by
    ``depth`` (collapsed to its center when the cell is too small).
    """
    targets = []
    start = 0
    spc = ref.samples_per_cell
    for label in goal_regions:
        cells = grid.regions.get(label, frozenset())
        idx = next((n for n in range(start, len(trace)) if tuple(trace[n]) in cells), None)
        if idx is None:
            raise InputError(f"trace never enters goal region {label!r}")
        k = min((idx + 1) * spc - 1, ref.horizon - 1) if idx < len(trace) - 1 else ref.horizon
        xlo, xhi, ylo, yhi = grid.cell_rect(trace[idx])
        d = min(depth, grid.cell_size / 2)
        targets.append((k, (xlo + d, xhi - d, ylo + d, yhi - d)))
        start = idx
    return targets


def encode_tracking_milp(ref: ReferenceSignal, grid: OccupancyGrid, x0, params: TrackingParams,
                         active=None, margin: float | None = None, goals=()) -> MilpProblem:
    """MILP for L1 reference tracking with big-M obstacle avoidance.

    Variables per step ``k``: ``px_k py_k vx_k vy_k`` (k = 0..H), ``u1_k u2_k``
    and their absolute values ``a1_k a2_k``, tracking errors ``ex_k ey_k``
    (k = 0..H-1), and ``b_k_r_<face>`` binaries for each ``(k, r)`` pair in
    ``active`` (default: every step 1..H against every obstacle rectangle).
    Position ``k`` must sit at least ``margin`` outside one face of rectangle ``r``.
    ``goals`` holds ``(k, (xmin, xmax, ymin, ymax))`` boxes position ``k`` must lie in.
    """
    params.validate(grid)
    H = ref.horizon
    ts = params.ts
    m = params.margin() if margin is None else margin
    xmin, xmax, ymin, ymax = grid.extent
    rects = grid.obstacle_rectangles()
    boxes = _inflated(rects, m)
    if len(rects) and _inside(np.array([x0[:2]]), boxes, tol=0.0).any():
        r = int(np.nonzero(_inside(np.array([x0[:2]]), boxes, tol=0.0)[0])[0][0])
        raise InfeasibleError(
            f"initial position {tuple(x0[:2])} lies within {m:g} m of obstacle rectangle {r}; "
            "no face of it can be satisfied"
        )
    vmax = params.v_max
    if abs(x0[2]) > vmax or abs(x0[3]) > vmax:
        raise InputError("initial velocity exceeds v_max")
    ad, bd, _ = discretize_double_integrator(ts)

    b = MilpBuilder("tracking")
    for k in range(H + 1):
        if k == 0:
            b.add_variable("px_0", x0[0], x0[0])
            b.add_variable("py_0", x0[1], x0[1])
            b.add_variable("vx_0", x0[2], x0[2])
            b.add_variable("vy_0", x0[3], x0[3])
        else:
            b.add_variable(f"px_{k}", xmin, xmax)
            b.add_variable(f"py_{k}", ymin, ymax)
            b.add_variable(f"vx_{k}", -vmax, vmax)
            b.add_variable(f"vy_{k}", -vmax, vmax)
    umag = max(abs(params.u_min), abs(params.u_max))
    emax = grid.diagonal
    for k in range(H):
        b.add_variable(f"u1_{k}", params.u_min, params.u_max)
        b.add_variable(f"u2_{k}", params.u_min, params.u_max)
        b.add_variable(f"a1_{k}", 0.0, umag)
        b.add_variable(f"a2_{k}", 0.0, umag)
        b.add_variable(f"ex_{k}", 0.0, emax)
        b.add_variable(f"ey_{k}", 0.0, emax)

    state = ("px", "py", "vx", "vy")
    for k in range(H):
        for r in range(4):
            terms = [(f"{state[r]}_{k + 1}", 1.0)]
            for c in range(4):
                if ad[r, c] != 0.0:
                    terms.append((f"{state[c]}_{k}", -ad[r, c]))
            for c in range(2):
                if bd[r, c] != 0.0:
                    terms.append((f"u{c + 1}_{k}", -bd[r, c]))
            b.add_constraint(terms, "=", 0.0, name=f"dyn_{state[r]}_{k}")
        for c in (1, 2):
            b.add_constraint([(f"a{c}_{k}", 1.0), (f"u{c}_{k}", -1.0)], ">=", 0.0, name=f"abs_pos_u{c}_{k}")
            b.add_constraint([(f"a{c}_{k}", 1.0), (f"u{c}_{k}", 1.0)], ">=", 0.0, name=f"abs_neg_u{c}_{k}")
        rx, ry = ref.points[k]
        b.add_constraint([("ex_" + str(k), 1.0), (f"px_{k}", -1.0)], ">=", -rx, name=f"trk_pos_x_{k}")
        b.add_constraint([("ex_" + str(k), 1.0), (f"px_{k}", 1.0)], ">=", rx, name=f"trk_neg_x_{k}")
        b.add_constraint([("ey_" + str(k), 1.0), (f"py_{k}", -1.0)], ">=", -ry, name=f"trk_pos_y_{k}")
        b.add_constraint([("ey_" + str(k), 1.0), (f"py_{k}", 1.0)], ">=", ry, name=f"trk_neg_y_{k}")

    if active is None:
        active = [(k, r) for k in range(1, H + 1) for r in range(len(rects))]
    bigm = params.big_m_for(grid)
    for k, r in sorted(active):
        bl, bh, cl, ch = boxes[r]
        # face: (position var, sign, bound); sign +1 means pos <= bound, -1 means pos >= bound
        faces = (("px", 1.0, bl), ("px", -1.0, bh), ("py", 1.0, cl), ("py", -1.0, ch))
        names = []
        for f, (var, sign, bound) in zip(FACES, faces):
            lo, hi = (xmin, xmax) if var == "px" else (ymin, ymax)
            if params.tight_big_m:
                M = max(hi - bound, 0.0) if sign > 0 else max(bound - lo, 0.0)
            else:
                M = bigm
            bn = f"b_{k}_{r}_{f}"
            b.add_variable(bn, 0.0, 1.0, "binary")
            names.append(bn)
            # sign*pos <= sign*bound + M(1 - b)
            b.add_constraint([(f"{var}_{k}", sign), (bn, M)], "<=", sign * bound + M, name=f"avoid_{k}_{r}_{f}")
        b.add_constraint([(n, 1.0) for n in names], ">=", 1.0, name=f"avoid_any_{k}_{r}")

    for n, (k, (gx0, gx1, gy0, gy1)) in enumerate(goals):
        b.add_constraint([(f"px_{k}", 1.0)], ">=", gx0, name=f"goal_{n}_xlo")
        b.add_constraint([(f"px_{k}", 1.0)], "<=", gx1, name=f"goal_{n}_xhi")
        b.add_constraint([(f"py_{k}", 1.0)], ">=", gy0, name=f"goal_{n}_ylo")
        b.add_constraint([(f"py_{k}", 1.0)], "<=", gy1, name=f"goal_{n}_yhi")

    obj = []
    for k in range(H):
        obj += [(f"a1_{k}", params.q1), (f"a2_{k}", params.q1), (f"ex_{k}", params.q2), (f"ey_{k}", params.q2)]
    b.set_objective(obj)
    return b.build()


def tracking_cost(ref_points, positions, controls, q1: float, q2: float) -> float:
    """Sum over k < H of ``q1 |u_k|_1 + q2 |y_k - ref_k|_1``."""
    ref_points = np.asarray(ref_points, dtype=float)
    H = len(ref_points)
    pos = np.asarray(positions, dtype=float)[:H]
    u = np.asarray(controls, dtype=float)[:H]
    return float(q1 * np.abs(u).sum() + q2 * np.abs(pos - ref_points).sum())


def constant_speed_traversal(points, speed: float, ts: float):
    """Sample a polyline at (at most) ``speed``; returns positions and finite-difference accelerations.

    Every vertex is a sample: each segment takes the fewest whole periods
    that keep its speed at or below ``speed``. The vehicle starts and ends at
    rest, so velocity jumps at both ends.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    keep = np.concatenate([[True], seg > 0])
    pts, seg = pts[keep], seg[seg > 0]
    if len(seg) == 0:
        return pts[:1].copy(), np.zeros((1, 2))
    pos = [pts[:1]]
    for a, b, length in zip(pts[:-1], pts[1:], seg):
        n = max(1, int(math.ceil(length / (speed * ts) - 1e-9)))
        f = np.arange(1, n + 1)[:, None] / n
        pos.append(a + f * (b - a))
    pos = np.vstack(pos)
    vel = np.vstack([np.zeros((1, 2)), np.diff(pos, axis=0) / ts, np.zeros((1, 2))])
    acc = np.diff(vel, axis=0) / ts
    return pos, acc


def traversal_speed(grid: OccupancyGrid, params: TrackingParams) -> float:
    """Nominal speed of the reference: one cell per ``samples_per_cell`` steps."""
    return grid.cell_size / (params.samples_per_cell * params.ts)


def path_cost(points, ref: ReferenceSignal, grid: OccupancyGrid, params: TrackingParams) -> float:
    """Tracking objective of a path driven open-loop at the reference's nominal speed.

    The path is traversed at constant speed from rest to rest and scored
    against ``ref`` with the same weights the MILP uses. Whichever of the
    traversal and the reference is shorter is padded with its final point
    (at rest), so paths that take longer than the horizon pay for the overrun.
    """
    pos, acc = constant_speed_traversal(points, traversal_speed(grid, params), params.ts)
    K = max(ref.horizon, len(pos))
    pos = np.vstack([pos, np.repeat(pos[-1:], K - len(pos), axis=0)])
    acc = np.vstack([acc, np.zeros((K - len(acc), 2))])
    rp = np.vstack([ref.points, np.repeat(ref.points[-1:], K - ref.horizon, axis=0)])
    return tracking_cost(rp, pos, acc, params.q1, params.q2)


@dataclass
class TrackingResult:
    trajectory: Trajectory
    controls: np.ndarray
    report: PlannerReport
    reference: ReferenceSignal
    objective: float
    outer_iterations: int
    margin: float
    binaries: int
    nodes: int
    robustness: object = None
    history: list = field(default_factory=list)


def _controls_from(sol, H):
    idx = sol.names
    return np.array([[sol.x[idx[f"u1_{k}"]], sol.x[idx[f"u2_{k}"]]] for k in range(H)])


def _face_hint(prob, ref, boxes, active):
    """Fix each pair's binaries to the face the reference point clears by the most."""
    hint = {}
    for k, r in active:
        rx, ry = ref.points[min(k, ref.horizon - 1)]
        bl, bh, cl, ch = boxes[r]
        slack = np.array([bl - rx, rx - bh, cl - ry, ry - ch])
        best = int(np.argmax(slack))
        for f, face in enumerate(FACES):
            hint[prob.index[f"b_{k}_{r}_{face}"]] = 1.0 if f == best else 0.0
    return hint


def _solve_with_lazy_obstacles(ref, grid, x0, params, margin, goals=()):
    """Solve the tracking MILP adding (step, rectangle) avoidance pairs on demand.

    Starts without avoidance constraints and adds the pairs violated by each
    solution. The final solution satisfies every pair, so it is optimal for
    the full encoding as well.
    """
    H = ref.horizon
    boxes = _inflated(grid.obstacle_rectangles(), margin)
    active: set[tuple[int, int]] = set()
    nodes = 0
    for rnd in range(params.max_lazy_rounds):
        prob = encode_tracking_milp(ref, grid, x0, params, active=active, margin=margin, goals=goals)
        opts = SolveOptions(abs_gap=params.abs_gap, time_limit=params.time_limit, lp_method=params.lp_method,
                            incumbent_hint=_face_hint(prob, ref, boxes, active))
        sol = solve(prob, opts)
        nodes += sol.nodes
        if sol.status == Status.INFEASIBLE:
            raise InfeasibleError(f"tracking MILP infeasible (margin {margin:g} m)")
        if sol.x is None:
            raise InfeasibleError(f"tracking MILP found no incumbent: {sol.status.value}")
        if sol.status != Status.OPTIMAL:
            log.warning("tracking MILP stopped at %s with gap %.3g", sol.status.value, sol.gap)
        u = _controls_from(sol, H)
        traj = simulate_linear(x0, u, params.ts)
        viol = _inside(traj.positions[1:], boxes, tol=1e-7)
        new = {(k + 1, int(r)) for k, r in zip(*np.nonzero(viol))} - active
        log.debug("lazy round %d: %d pairs, %d nodes, %d new violations", rnd, len(active), sol.nodes, len(new))
        if not new:
            return prob, sol, u, traj, nodes
        active |= new
    raise InfeasibleError("obstacle constraint generation did not converge")


def solve_tracking(grid: OccupancyGrid, trace, x0=None, params: TrackingParams | None = None,
                   goal_regions=(), name: str = "LTL + MILP") -> TrackingResult:
    """Encode, solve, roll out and verify; widen the clearance margin until rho >= rho_min."""
    params = (params or TrackingParams()).validate(grid)
    t0 = time.perf_counter()
    ref = build_reference(trace, grid, params)
    if x0 is None:
        x0 = initial_state(trace, grid, params)
    goals = goal_targets(trace, grid, goal_regions, ref, params.rho_min)
    margin = params.margin()
    best = None
    history = []
    for it in range(1, params.max_outer_iters + 1):
        try:
            prob, sol, u, traj, nodes = _solve_with_lazy_obstacles(ref, grid, x0, params, margin, goals)
        except InfeasibleError:
            if best is None:
                raise
            break
        rob = verify_trajectory(traj, grid, list(goal_regions), params.rho_min)
        history.append((margin, rob.rho, sol.objective))
        log.info("outer iteration %d: margin %.3f, rho %.4f, J %.4f", it, margin, rob.rho, sol.objective)
        if best is None or rob.rho > best[1].rho:
            best = (traj, rob, u, sol, prob, nodes)
        if rob.rho >= params.rho_min:
            elapsed = time.perf_counter() - t0
            report = PlannerReport(name, rob.rho, elapsed, sol.objective)
            return TrackingResult(traj, u, report, ref, sol.objective, it, margin, len(prob.binaries),
                                  nodes, rob, history)
        margin += params.rho_step
    raise InfeasibleError(
        f"robustness loop stopped after {len(history)} iterations; best rho {best[1].rho:.4f}"
    )
