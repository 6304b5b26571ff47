import numpy as np
import pytest

from oracles import grid_from_ascii, tracking_face_enumeration
from tlnav.dynamics import LinearState, simulate_linear
from tlnav.env import clearance_many, region_labels
from tlnav.errors import InfeasibleError, InputError
from tlnav.milp import SolveOptions, solve
from tlnav.symbolic import plan_path, witness_goals
from tlnav.tracking import (
    FACES,
    ReferenceSignal,
    TrackingParams,
    build_reference,
    constant_speed_traversal,
    encode_tracking_milp,
    goal_targets,
    initial_state,
    path_cost,
    solve_tracking,
    tracking_cost,
)

BLOCK = ["......", "......", "...#..", "......", "......"]


def _block_setup(horizon=5):
    g = grid_from_ascii(BLOCK)
    p = TrackingParams(horizon=horizon, ts=0.5, rho_min=0.2, corner_margin=0.0)
    # a straight reference through the obstacle at row y = 2.5
    xs = np.linspace(1.0, 5.5, horizon)
    ref = ReferenceSignal(np.column_stack([xs, np.full(horizon, 2.5)]), None, 1)
    return g, p, ref, (0.5, 2.5, 2.0, 0.0)


def _solve(prob):
    return solve(prob, SolveOptions(lp_method="highs"))


# ---------------------------------------------------------------- parameters and reference

def test_params_validation():
    with pytest.raises(InputError):
        TrackingParams(q1=0, q2=0).validate()
    with pytest.raises(InputError):
        TrackingParams(horizon=1).validate()
    with pytest.raises(InputError):
        TrackingParams(ts=0).validate()
    g = grid_from_ascii(BLOCK)
    with pytest.raises(InputError, match="diagonal"):
        TrackingParams(big_M=1.0).validate(g)


def test_default_margin_adds_half_a_step_of_travel():
    assert TrackingParams().margin() == pytest.approx(1.0 + 4.0 * 0.1 / 2)
    assert TrackingParams(corner_margin=0.0).margin() == 1.0


def test_reference_holds_each_center():
    g = grid_from_ascii(["...", "..."])
    ref = build_reference([(0, 0), (1, 0), (2, 0)], g, TrackingParams(samples_per_cell=3))
    assert ref.horizon == 9
    np.testing.assert_array_equal(ref.points[:, 0], [0.5] * 3 + [1.5] * 3 + [2.5] * 3)


def test_reference_pads_and_compresses():
    g = grid_from_ascii(["...", "..."])
    trace = [(0, 0), (1, 0), (2, 0)]
    long = build_reference(trace, g, TrackingParams(samples_per_cell=2, horizon=8))
    np.testing.assert_array_equal(long.points[:, 0], [0.5, 0.5, 1.5, 1.5, 2.5, 2.5, 2.5, 2.5])
    short = build_reference(trace, g, TrackingParams(samples_per_cell=5, horizon=4))
    np.testing.assert_array_equal(short.points[:, 0], [0.5, 0.5, 1.5, 2.5])
    with pytest.raises(InputError):
        build_reference(trace, g, TrackingParams(horizon=2))


def test_initial_state_heads_to_second_waypoint():
    g = grid_from_ascii(["...", "..."])
    s = initial_state([(1, 0), (1, 1)], g, TrackingParams(v0=0.3))
    assert (s.x, s.y) == (1.5, 0.5)
    assert s.vx == pytest.approx(0.0, abs=1e-15) and s.vy == pytest.approx(0.3)


def test_goal_targets_in_order():
    g = grid_from_ascii(["1.2"])
    trace = [(0, 0), (1, 0), (2, 0)]
    p = TrackingParams(samples_per_cell=4)
    ref = build_reference(trace, g, p)
    targets = goal_targets(trace, g, ["pi1", "pi2"], ref, depth=0.2)
    assert targets[0] == (3, pytest.approx((0.2, 0.8, 0.2, 0.8)))
    # the final goal cell is pinned at the terminal state
    assert targets[1][0] == ref.horizon
    with pytest.raises(InputError):
        goal_targets(trace[:2], g, ["pi2"], ref, depth=0.2)


# ---------------------------------------------------------------- encoding

def test_full_encoding_has_four_binaries_per_step_and_rectangle():
    g, p, ref, x0 = _block_setup()
    prob = encode_tracking_milp(ref, g, x0, p)
    assert len(prob.binaries) == 4 * ref.horizon * len(g.obstacle_rectangles())
    names = {prob.variables[j].name for j in prob.binaries}
    assert {f"b_1_0_{f}" for f in FACES} <= names


def test_stationary_reference_costs_nothing():
    g = grid_from_ascii(BLOCK)
    p = TrackingParams(horizon=6, ts=0.2, rho_min=0.3)
    ref = ReferenceSignal(np.tile([[0.5, 0.5]], (6, 1)), None, 1)
    sol = _solve(encode_tracking_milp(ref, g, (0.5, 0.5, 0.0, 0.0), p))
    assert sol.ok and sol.objective == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("tight", [True, False])
def test_matches_face_enumeration(tight):
    g, p, ref, x0 = _block_setup()
    p.tight_big_m = tight
    sol = _solve(encode_tracking_milp(ref, g, x0, p))
    m = p.margin()
    box = g.obstacle_rectangles()[0] + np.array([-m, m, -m, m])
    want = tracking_face_enumeration(ref.points, x0, p.ts, (p.u_min, p.u_max), p.v_max, g.extent, box,
                                     p.q1, p.q2)
    assert sol.objective == pytest.approx(want, abs=1e-6)


def test_solution_replays_and_objective_recomputes():
    g, p, ref, x0 = _block_setup()
    prob = encode_tracking_milp(ref, g, x0, p)
    sol = _solve(prob)
    H = ref.horizon
    u = np.array([[sol.value(f"u1_{k}"), sol.value(f"u2_{k}")] for k in range(H)])
    traj = simulate_linear(LinearState(*x0), u, p.ts)
    for k in range(H + 1):
        got = [sol.value(f"{s}_{k}") for s in ("px", "py", "vx", "vy")]
        np.testing.assert_allclose(got, traj.states[k], atol=1e-9)
    assert tracking_cost(ref.points, traj.positions, u, p.q1, p.q2) == pytest.approx(sol.objective, abs=1e-7)


def test_solution_clears_inflated_obstacle():
    g, p, ref, x0 = _block_setup()
    sol = _solve(encode_tracking_milp(ref, g, x0, p))
    xlo, xhi, ylo, yhi = g.obstacle_rectangles()[0]
    m = p.margin()
    for k in range(1, ref.horizon + 1):
        x, y = sol.value(f"px_{k}"), sol.value(f"py_{k}")
        outside = x <= xlo - m + 1e-7 or x >= xhi + m - 1e-7 or y <= ylo - m + 1e-7 or y >= yhi + m - 1e-7
        assert outside


def test_start_inside_margin_is_infeasible():
    g, p, ref, _ = _block_setup()
    with pytest.raises(InfeasibleError, match="within"):
        encode_tracking_milp(ref, g, (2.9, 2.5, 0.0, 0.0), p)


def test_heavier_control_weight_never_raises_effort():
    g, p, ref, x0 = _block_setup()
    efforts = []
    for q1 in (0.1, 1.0, 10.0):
        p.q1 = q1
        sol = _solve(encode_tracking_milp(ref, g, x0, p))
        efforts.append(sum(sol.value(f"a{c}_{k}") for c in (1, 2) for k in range(ref.horizon)))
    assert efforts[0] >= efforts[1] - 1e-7 >= efforts[2] - 2e-7


def test_heavier_tracking_weight_never_raises_error():
    g, p, ref, x0 = _block_setup()
    errors = []
    for q2 in (1.0, 10.0, 100.0):
        p.q2 = q2
        sol = _solve(encode_tracking_milp(ref, g, x0, p))
        errors.append(sum(sol.value(f"{e}_{k}") for e in ("ex", "ey") for k in range(ref.horizon)))
    assert errors[0] >= errors[1] - 1e-7 >= errors[2] - 2e-7


# ---------------------------------------------------------------- costs

def test_tracking_cost_by_hand():
    ref = np.array([[0.0, 0.0], [1.0, 0.0]])
    pos = np.array([[0.0, 1.0], [1.5, 0.0], [9.0, 9.0]])
    u = np.array([[1.0, -2.0], [0.0, 0.5]])
    assert tracking_cost(ref, pos, u, 2.0, 3.0) == pytest.approx(2 * 3.5 + 3 * 1.5)


def test_constant_speed_traversal_respects_speed():
    pos, acc = constant_speed_traversal([[0, 0], [3, 0], [3, 4]], speed=2.0, ts=0.5)
    steps = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    assert np.all(steps <= 2.0 * 0.5 + 1e-12)
    assert len(acc) == len(pos)
    # acceleration integrates back to rest
    np.testing.assert_allclose(acc.sum(axis=0) * 0.5, 0.0, atol=1e-12)


def test_path_cost_of_the_reference_path_is_only_effort():
    g = grid_from_ascii(["....."])
    p = TrackingParams(samples_per_cell=1, ts=0.25)
    trace = [(0, 0), (1, 0), (2, 0)]
    ref = build_reference(trace, g, p)
    pts = ref.waypoints
    # one cell per step: traversal lands on every waypoint at the matching sample
    cost = path_cost(pts, ref, g, p)
    _, acc = constant_speed_traversal(pts, 1.0 / 0.25, 0.25)
    assert cost == pytest.approx(p.q1 * np.abs(acc).sum())


# ---------------------------------------------------------------- full loop

def test_lazy_constraints_match_full_encoding():
    g = grid_from_ascii(["....", ".##.", "....", "...."])
    # the reference hugs the obstacle; smoothing the corners pulls the vehicle toward it
    trace = [(0, 2), (0, 1), (1, 1), (2, 1), (3, 1), (3, 2)]
    p = TrackingParams(rho_min=0.3, samples_per_cell=4, corner_margin=0.1, q2=50)
    res = solve_tracking(g, trace, params=p)
    assert res.binaries > 0
    assert res.report.rho >= p.rho_min - 1e-6
    assert np.all(clearance_many(res.trajectory.positions, g) >= p.rho_min - 1e-6)
    full = solve(encode_tracking_milp(res.reference, g, initial_state(trace, g, p), p),
                 SolveOptions(lp_method="highs", time_limit=60))
    assert full.objective == pytest.approx(res.objective, abs=1e-6)


@pytest.mark.parametrize("name", ["simple", "complex"])
def test_bundled_maps_meet_rho_min(name, request):
    grid = request.getfixturevalue(f"{name}_grid")
    phi = request.getfixturevalue(f"{name}_phi")
    trace = plan_path(grid, phi, (1, 1))
    goals = witness_goals(phi, [region_labels(c, grid) for c in trace])
    p = TrackingParams()
    res = solve_tracking(grid, trace, params=p, goal_regions=goals)
    assert res.report.rho >= p.rho_min - 1e-6
    assert np.all(clearance_many(res.trajectory.positions, grid) >= p.rho_min - 1e-6)
    H = res.reference.horizon
    assert tracking_cost(res.reference.points, res.trajectory.positions, res.controls, p.q1, p.q2) \
        == pytest.approx(res.objective, rel=1e-9, abs=1e-6)
    assert len(res.controls) == H


def test_unreachable_margin_raises():
    g = grid_from_ascii(["#.#", "#.#", "#.#"])
    trace = [(1, 0), (1, 1), (1, 2)]
    with pytest.raises(InfeasibleError):
        solve_tracking(g, trace, params=TrackingParams(rho_min=0.8, samples_per_cell=3))
