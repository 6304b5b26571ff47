import math

import numpy as np
import pytest

from oracles import dijkstra_cells, grid_from_ascii, random_map
from tlnav.baselines import (
    RrtParams,
    astar,
    plan_sequential,
    polyline_length,
    rrt_leg_planner,
    rrt_star,
    segment_hits,
)
from tlnav.errors import InputError, NoPathError

OPEN = ["." * 10] * 9 + ["." * 9 + "1"]
OPEN = OPEN[::-1]  # goal in the top-right cell

MAZE = [
    "........2.",
    ".######...",
    ".#....#.#.",
    ".#.##.#.#.",
    "...#..#.#1",
    "####.##.##",
    "..........",
]


def _dense_free(path, grid, step=0.01):
    """Sample every segment at ``step`` and test each point against obstacle interiors."""
    rects = grid.obstacle_rectangles()
    for p, q in zip(path[:-1], path[1:]):
        n = max(2, int(math.ceil(np.linalg.norm(q - p) / step)) + 1)
        pts = p + np.linspace(0, 1, n)[:, None] * (q - p)
        inside = ((pts[:, 0:1] > rects[:, 0] + 1e-9) & (pts[:, 0:1] < rects[:, 1] - 1e-9)
                  & (pts[:, 1:2] > rects[:, 2] + 1e-9) & (pts[:, 1:2] < rects[:, 3] - 1e-9))
        if inside.any():
            return False
    return True


# ---------------------------------------------------------------- A*

def test_astar_open_grid_length():
    g = grid_from_ascii(OPEN)
    path = astar(g, (0, 0), "pi1")
    assert path[0] == (0, 0) and path[-1] == (9, 9)
    assert len(path) == 19


def test_astar_maze_matches_dijkstra():
    g = grid_from_ascii(MAZE)
    for label in ("pi1", "pi2"):
        path = astar(g, (0, 0), label)
        assert len(path) == dijkstra_cells(g, (0, 0), label)
        assert all(g.is_free(c) for c in path)
        assert all(abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1 for a, b in zip(path, path[1:]))


@pytest.mark.parametrize("seed", range(20))
def test_astar_random_maps_optimal(seed):
    grid, start = random_map(np.random.default_rng(seed), 12, 12, density=0.3)
    want = dijkstra_cells(grid, start, "pi1")
    if want is None:
        with pytest.raises(NoPathError):
            astar(grid, start, "pi1")
    else:
        assert len(astar(grid, start, "pi1")) == want


def test_astar_start_in_goal():
    g = grid_from_ascii(["1.."])
    assert astar(g, (0, 0), "pi1") == [(0, 0)]


def test_astar_no_path():
    g = grid_from_ascii(["..#1"])
    with pytest.raises(NoPathError):
        astar(g, (0, 0), "pi1")


def test_astar_bad_start_and_goal():
    g = grid_from_ascii([".#1"])
    with pytest.raises(InputError):
        astar(g, (1, 0), "pi1")
    with pytest.raises(InputError):
        astar(g, (0, 0), "pi7")


# ---------------------------------------------------------------- geometry helpers

def test_segment_hits_interior_only():
    rects = np.array([[1.0, 2.0, 1.0, 2.0]])
    assert segment_hits((0, 1.5), (3, 1.5), rects)[0]
    # sliding along an edge or touching a corner is allowed
    assert not segment_hits((0, 1.0), (3, 1.0), rects)[0]
    assert not segment_hits((0, 0), (1, 1), rects)[0]
    assert not segment_hits((0, 0), (0.5, 3), rects)[0]
    assert segment_hits((1.5, 0), (1.5, 3), rects)[0]


def test_polyline_length():
    assert polyline_length([[0, 0], [3, 0], [3, 4]]) == 7.0
    assert polyline_length([[1, 1]]) == 0.0


# ---------------------------------------------------------------- RRT*

def test_rrt_deterministic_for_fixed_seed():
    g = grid_from_ascii(MAZE)
    params = RrtParams(max_iterations=1500, rng_seed=7)
    a = rrt_star(g, (0.5, 0.5), "pi2", params)
    b = rrt_star(g, (0.5, 0.5), "pi2", params)
    assert np.array_equal(a.path, b.path) and a.cost == b.cost


def test_rrt_cost_history_nonincreasing():
    g = grid_from_ascii(MAZE)
    res = rrt_star(g, (0.5, 0.5), "pi2", RrtParams(max_iterations=2000, rng_seed=3))
    finite = res.cost_history[np.isfinite(res.cost_history)]
    assert len(finite) > 0
    assert np.all(np.diff(finite) <= 1e-12)
    assert res.cost == pytest.approx(finite[-1])
    assert res.cost == pytest.approx(res.length)


def test_rrt_path_collision_free_at_one_centimetre():
    g = grid_from_ascii(MAZE)
    for seed in range(3):
        res = rrt_star(g, (0.5, 0.5), "pi1", RrtParams(max_iterations=3000, rng_seed=seed))
        assert _dense_free(res.path, g)
        assert np.allclose(res.path[0], [0.5, 0.5])
        x, y = res.path[-1]
        assert 9 <= x <= 10 and 2 <= y <= 3


def test_rrt_tree_parents_form_a_tree():
    g = grid_from_ascii(MAZE)
    res = rrt_star(g, (0.5, 0.5), "pi2", RrtParams(max_iterations=800, rng_seed=1))
    assert res.parents[0] == -1
    assert np.all((res.parents[1:] >= 0) & (res.parents[1:] < len(res.nodes)))
    for k in range(1, len(res.nodes)):
        seen, m = set(), k
        while m != -1:
            assert m not in seen
            seen.add(m)
            m = res.parents[m]


def test_rrt_empty_map_near_straight_line():
    g = grid_from_ascii(OPEN)
    # the closest point of the goal cell [9, 10]^2 is its corner (9, 9)
    straight = math.hypot(8.5, 8.5)
    good = 0
    for seed in range(10):
        res = rrt_star(g, (0.5, 0.5), "pi1", RrtParams(max_iterations=2000, rng_seed=seed))
        good += res.length <= 1.2 * straight
    assert good >= 8


def test_rrt_start_in_goal():
    g = grid_from_ascii(["1.."])
    res = rrt_star(g, (0.5, 0.5), "pi1", RrtParams(max_iterations=50))
    assert res.cost == 0.0 and res.length == 0.0


def test_rrt_no_path_when_enclosed():
    g = grid_from_ascii(["..#1"])
    with pytest.raises(NoPathError):
        rrt_star(g, (0.5, 0.5), "pi1", RrtParams(max_iterations=300))


def test_rrt_rejects_bad_inputs():
    g = grid_from_ascii([".#1"])
    with pytest.raises(InputError):
        rrt_star(g, (1.5, 0.5), "pi1")
    with pytest.raises(InputError):
        rrt_star(g, (0.5, 0.5), "pi1", RrtParams(step_size=0.0))
    with pytest.raises(InputError):
        rrt_star(g, (0.5, 0.5), "pi1", RrtParams(goal_bias=1.5))


# ---------------------------------------------------------------- sequential composition

def test_sequential_astar_joins_legs():
    g = grid_from_ascii(MAZE)
    path = plan_sequential(astar, g, (0, 0), ["pi2", "pi1"])
    first = astar(g, (0, 0), "pi2")
    second = astar(g, first[-1], "pi1")
    assert path == first + second[1:]


def test_sequential_failure_names_leg():
    g = grid_from_ascii(["1.#2"])
    with pytest.raises(NoPathError, match="leg 2") as info:
        plan_sequential(astar, g, (1, 0), ["pi1", "pi2"])
    assert info.value.leg == 2


def test_sequential_requires_goals():
    g = grid_from_ascii(["1.."])
    with pytest.raises(InputError):
        plan_sequential(astar, g, (0, 0), [])


def test_rrt_leg_planner_reproducible():
    g = grid_from_ascii(MAZE)
    params = RrtParams(max_iterations=800, rng_seed=11)
    a = plan_sequential(rrt_leg_planner(params), g, (0.5, 0.5), ["pi2", "pi1"])
    b = plan_sequential(rrt_leg_planner(params), g, (0.5, 0.5), ["pi2", "pi1"])
    assert np.array_equal(np.array(a), np.array(b))
