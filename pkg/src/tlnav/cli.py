"""Command-line front end: ``tlnav plan | track | verify | compare``.

Every subcommand writes CSV and SVG files into ``--out-dir`` and prints
``key=value`` report lines on stdout. Exit codes: 0 success, 2 bad input,
3 no path or infeasible MILP, 4 internal numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import csvio
from .env import cell_to_world, load_map, region_labels
from .errors import InputError, TlnavError
from .ltl import eval_finite_trace, parse_ltl
from .pipeline import DISPLAY, PLANNERS, Instance, compare, run_milp, unicycle_rollout, verify_positions
from .plotting import plot_paths, plot_robustness, slug
from .report import format_table
from .symbolic import trace_rows
from .tracking import TrackingParams

log = logging.getLogger("tlnav")

# option name -> TrackingParams field, for keys accepted from flags and config alike
FLAG_FIELDS = {"rho_min": "rho_min", "ts": "ts", "q1": "q1", "q2": "q2", "horizon": "horizon"}
RUN_KEYS = {"start", "seed", "planner", "out_dir"}


def _parse_start(text) -> tuple[int, int]:
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = str(text).split(",")
    try:
        i, j = (int(p) for p in parts)
    except ValueError:
        raise InputError(f"--start expects 'i,j', got {text!r}") from None
    return i, j


def _read_spec(value: str):
    p = Path(value)
    text = p.read_text(encoding="utf-8") if p.is_file() else value
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    return parse_ltl(" ".join(ln for ln in lines if ln))


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise InputError(f"config {path}: top level must be an object")
    known = {f.name for f in fields(TrackingParams)} | RUN_KEYS
    unknown = sorted(set(data) - known)
    if unknown:
        raise InputError(f"config {path}: unknown keys {', '.join(unknown)}")
    return data


def resolve(args) -> tuple[dict, TrackingParams]:
    """Merge defaults, config file and flags (later wins)."""
    cfg = _load_config(args.config)
    run = {"start": None, "seed": 0, "planner": "all", "out_dir": "."}
    tp = {}
    for k, v in cfg.items():
        (run if k in RUN_KEYS else tp)[k] = v
    for flag, fieldname in FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            tp[fieldname] = v
    for k in RUN_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            run[k] = v
    if run["start"] is None:
        raise InputError("a start cell is required (--start i,j or 'start' in the config)")
    run["start"] = _parse_start(run["start"])
    try:
        params = TrackingParams(**tp)
    except TypeError as exc:
        raise InputError(str(exc)) from None
    return run, params.validate()


def _out(run) -> Path:
    d = Path(run["out_dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _setup(args):
    run, params = resolve(args)
    grid = load_map(args.map)
    phi = _read_spec(args.spec)
    return run, params, grid, phi


def cmd_plan(args) -> int:
    run, params, grid, phi = _setup(args)
    inst = Instance(grid, phi, run["start"], params)
    trace = inst.plan()
    out = _out(run)
    csvio.write_trace(out / "trace.csv", trace_rows(trace, grid))
    pts = np.array([cell_to_world(c, grid) for c in trace])
    plot_paths(grid, {DISPLAY["ltl"]: pts}, out / "trace.svg", title="LTL reference path")
    ok = eval_finite_trace(phi, [region_labels(c, grid) for c in trace])
    print(f"planner=LTL status=ok length={len(trace)} satisfies={str(ok).lower()} "
          f"goals={','.join(inst.goals)} T={inst.plan_time:.4f}")
    return 0


def cmd_track(args) -> int:
    run, params, grid, phi = _setup(args)
    inst = Instance(grid, phi, run["start"], params)
    inst.plan()
    res = run_milp(inst)
    tr = res.extra["tracking"]
    out = _out(run)
    csvio.write_trajectory(out / "trajectory.csv", res.trajectory)
    csvio.write_controls(out / "controls.csv", tr.controls, params.ts)
    uni = unicycle_rollout(tr, params)
    csvio.write_trajectory(out / "unicycle.csv", uni, with_controls=False)
    clear = res.robustness.details["clearance"]
    csvio.write_robustness(out / "robustness.csv", res.trajectory.times, clear)
    plot_paths(grid, {DISPLAY["ltl"]: tr.reference.waypoints, DISPLAY["milp"]: res.trajectory.positions,
                      "unicycle": uni.positions}, out / "trajectory.svg", title="Reference tracking")
    plot_robustness({DISPLAY["milp"]: (res.trajectory.times, clear)}, out / "robustness.svg", params.rho_min)
    print(res.report.line() + f" iterations={tr.outer_iterations} margin={tr.margin:.3f} "
          f"binaries={tr.binaries} nodes={tr.nodes}")
    return 0


def cmd_verify(args) -> int:
    run, params, grid, phi = _setup(args)
    traj = csvio.read_trajectory(args.trajectory)
    ts = float(traj.times[1] - traj.times[0]) if len(traj) > 1 else params.ts
    rob, goals = verify_positions(traj.positions, ts, grid, phi, params.rho_min)
    out = _out(run)
    clear = rob.details["clearance"]
    csvio.write_robustness(out / "robustness.csv", traj.times, clear)
    plot_robustness({Path(args.trajectory).stem: (traj.times, clear)}, out / "robustness.svg", params.rho_min)
    print(f"rho={rob.rho:.6f} rho_safety={rob.details['rho_safety']:.6f} "
          f"rho_reach={rob.details['rho_reach']:.6f} goals={','.join(goals)} "
          f"meets_rho_min={str(bool(rob.details['meets_rho_min'])).lower()}")
    return 0


def cmd_compare(args) -> int:
    run, params, grid, phi = _setup(args)
    planners = PLANNERS if run["planner"] == "all" else (run["planner"],)
    inst = Instance(grid, phi, run["start"], params, seed=int(run["seed"]))
    runs = compare(inst, planners)
    out = _out(run)
    reports = [r.report for r in runs]
    table = format_table(reports)
    (out / "table.txt").write_text(table, encoding="utf-8")
    csvio.write_summary(out / "summary.csv", reports)
    paths, curves = {}, {}
    for r in runs:
        if r.trajectory is None:
            continue
        name = r.report.planner
        csvio.write_trajectory(out / f"trajectory_{slug(name)}.csv", r.trajectory)
        clear = r.robustness.details["clearance"]
        csvio.write_robustness(out / f"robustness_{slug(name)}.csv", r.trajectory.times, clear)
        paths[name] = r.trajectory.positions
        curves[name] = (r.trajectory.times, clear)
    plot_paths(grid, paths, out / "paths.svg", title="Planner comparison")
    plot_robustness(curves, out / "robustness.svg", params.rho_min, title="Wall clearance over time")
    sys.stdout.write(table)
    for rep in reports:
        print(rep.line())
    return 0


COMMANDS = {"plan": cmd_plan, "track": cmd_track, "verify": cmd_verify, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--map", required=True, help="map file")
    common.add_argument("--spec", required=True, help="LTL specification file or formula text")
    common.add_argument("--start", help="start cell as i,j")
    common.add_argument("--config", help="JSON file overriding defaults; flags override it")
    common.add_argument("--rho-min", dest="rho_min", type=float)
    common.add_argument("--ts", type=float, help="sampling period (s)")
    common.add_argument("--q1", type=float, help="control-effort weight")
    common.add_argument("--q2", type=float, help="tracking-error weight")
    common.add_argument("--horizon", type=int, help="MILP horizon in steps")
    common.add_argument("--seed", type=int, help="RRT* seed")
    common.add_argument("--out-dir", dest="out_dir", help="output directory (default: current)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="tlnav", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("plan", parents=[common], help="symbolic LTL path")
    sub.add_parser("track", parents=[common], help="plan, then solve the tracking MILP")
    v = sub.add_parser("verify", parents=[common], help="STL robustness of a trajectory CSV")
    v.add_argument("--trajectory", required=True, help="trajectory CSV (k,t,x,y,...)")
    c = sub.add_parser("compare", parents=[common], help="LTL, LTL + MILP, A* and RRT* side by side")
    c.add_argument("--planner", choices=PLANNERS + ("all",))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except TlnavError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
