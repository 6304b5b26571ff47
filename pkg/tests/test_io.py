import xml.etree.ElementTree as ET

import numpy as np
import pytest

from tlnav import csvio
from tlnav.dynamics import Trajectory
from tlnav.env import Cell
from tlnav.errors import InputError
from tlnav.plotting import plot_paths, plot_robustness, slug
from tlnav.report import PlannerReport, format_table

SVG = "{http://www.w3.org/2000/svg}"


# ---------------------------------------------------------------- CSV

def test_trace_round_trip(tmp_path):
    rows = [(0, 1, 1, 7.5, 7.5), (1, 1, 2, 7.5, 12.5)]
    path = csvio.write_trace(tmp_path / "t.csv", rows)
    assert path.read_text().splitlines()[0] == "step,i,j,x,y"
    cells, xy = csvio.read_trace(path)
    assert cells == [Cell(1, 1), Cell(1, 2)]
    np.testing.assert_array_equal(xy, [[7.5, 7.5], [7.5, 12.5]])


def test_trajectory_round_trip_is_exact(tmp_path, rng):
    states = rng.normal(size=(6, 4))
    ctrl = rng.normal(size=(5, 2))
    traj = Trajectory(0.1 * np.arange(6), states, kind="linear", controls=ctrl)
    back = csvio.read_trajectory(csvio.write_trajectory(tmp_path / "x.csv", traj))
    assert np.array_equal(back.states, states)
    assert np.array_equal(back.controls, ctrl)
    assert np.array_equal(back.times, traj.times)
    assert back.kind == "linear"


def test_unicycle_trajectory_columns(tmp_path):
    traj = Trajectory([0.0, 0.5], np.ones((2, 4)), kind="unicycle")
    path = csvio.write_trajectory(tmp_path / "u.csv", traj)
    assert path.read_text().splitlines()[0] == "k,t,x,y,theta,v"
    assert csvio.read_trajectory(path).kind == "unicycle"


def test_controls_and_robustness_round_trip(tmp_path, rng):
    u = rng.normal(size=(4, 2))
    assert np.array_equal(csvio.read_controls(csvio.write_controls(tmp_path / "c.csv", u, 0.1)), u)
    t, r = np.arange(3) * 0.1, np.array([1.0, 1 / 3, -2.0])
    t2, r2 = csvio.read_robustness(csvio.write_robustness(tmp_path / "r.csv", t, r))
    assert np.array_equal(t2, t) and np.array_equal(r2, r)


def test_summary_round_trip(tmp_path):
    reps = [PlannerReport("LTL", 1.83, 0.1), PlannerReport("A*", None, 0.2, status="no path")]
    out = csvio.read_summary(csvio.write_summary(tmp_path / "s.csv", reps))
    assert out == [{"planner": "LTL", "status": "ok", "rho": 1.83, "J": None},
                   {"planner": "A*", "status": "no path", "rho": None, "J": None}]


def test_bad_headers_rejected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n1,2,3\n")
    for reader in (csvio.read_trace, csvio.read_trajectory, csvio.read_controls, csvio.read_robustness):
        with pytest.raises(InputError):
            reader(p)
    p.write_text("")
    with pytest.raises(InputError, match="empty"):
        csvio.read_trace(p)


# ---------------------------------------------------------------- report

def test_report_line():
    r = PlannerReport("LTL + MILP", 1.8312, 3.014, 64.93)
    assert r.line() == "planner=LTL + MILP status=ok rho=1.83 T=3.01 J=64.93"
    assert PlannerReport("LTL", None, 1.86).line().endswith("J=-")


def test_negative_wall_time_rejected():
    with pytest.raises(ValueError):
        PlannerReport("x", 1.0, -0.1)


def test_table_layout_with_published_style_values():
    reps = [
        PlannerReport("RRT*", 1.83, 3.56, 90.0),
        PlannerReport("A*", 1.00, 0.99, 58.8),
        PlannerReport("LTL + MILP", 1.83, 3.01, 64.9),
        PlannerReport("LTL", 1.83, 1.86, None),
    ]
    lines = format_table(reps).splitlines()
    assert lines[1] == "| Planner    | rho(phi) | T(s) | J     |"
    assert lines[3] == "| RRT*       | 1.83     | 3.56 | 90.00 |"
    assert lines[4] == "| A*         | 1.00     | 0.99 | 58.80 |"
    assert lines[5] == "| LTL + MILP | 1.83     | 3.01 | 64.90 |"
    assert lines[6] == "| LTL        | 1.83     | 1.86 | -     |"
    assert lines[0] == lines[2] == lines[-1]
    assert len({len(ln) for ln in lines}) == 1


def test_table_shows_failure_status():
    table = format_table([PlannerReport("RRT*", None, 2.0, status="no path")])
    assert "| RRT*    | no path  | 2.00 | - |" in table


# ---------------------------------------------------------------- plotting

def _gids(path):
    root = ET.parse(path).getroot()
    return [el.get("id") for el in root.iter(f"{SVG}g") if el.get("id")]


def test_slug():
    assert slug("LTL + MILP") == "ltl-plus-milp"
    assert slug("RRT*") == "rrtstar"
    assert slug("A*") == "astar"


def test_plot_paths_one_group_per_trajectory(tmp_path, simple_grid):
    paths = {"LTL": np.array([[7.5, 7.5], [7.5, 12.5]]), "A*": np.array([[7.5, 7.5], [12.5, 7.5]])}
    out = plot_paths(simple_grid, paths, tmp_path / "p.svg", title="t")
    gids = _gids(out)
    assert gids.count("trajectory-ltl") == 1 and gids.count("trajectory-astar") == 1
    root = ET.parse(out).getroot()
    for el in root.iter(f"{SVG}g"):
        if el.get("id", "").startswith("trajectory-"):
            assert len(list(el.iter(f"{SVG}path"))) == 1


def test_plot_robustness_threshold_and_stability(tmp_path):
    curves = {"LTL": (np.arange(4) * 0.1, np.array([2.0, 1.5, 1.2, 1.9]))}
    a = plot_robustness(curves, tmp_path / "a.svg", rho_min=1.0)
    b = plot_robustness(curves, tmp_path / "b.svg", rho_min=1.0)
    assert "threshold" in _gids(a) and "trajectory-ltl" in _gids(a)
    assert a.read_bytes() == b.read_bytes()
