"""CSV writers and readers for traces, trajectories, controls and robustness curves.

Numbers are written with 17 significant digits so every file reads back to
the exact floats that produced it.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .dynamics import Trajectory
from .env import Cell
from .errors import InputError

TRACE_HEADER = ["step", "i", "j", "x", "y"]
LINEAR_COLS = ["x", "y", "vx", "vy"]
UNICYCLE_COLS = ["x", "y", "theta", "v"]


def _f(v: float) -> str:
    return format(float(v), ".17g")


def _write(path, header, rows) -> Path:
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _read(path, expected=None):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    if expected is not None and header[: len(expected)] != expected:
        raise InputError(f"{path}: expected columns {','.join(expected)}, got {','.join(header)}")
    return header, body


def write_trace(path, rows) -> Path:
    """Rows ``(step, i, j, x, y)`` as produced by ``symbolic.trace_rows``."""
    return _write(path, TRACE_HEADER, [(int(s), int(i), int(j), _f(x), _f(y)) for s, i, j, x, y in rows])


def read_trace(path) -> tuple[list[Cell], np.ndarray]:
    _, body = _read(path, TRACE_HEADER)
    try:
        cells = [Cell(int(r[1]), int(r[2])) for r in body]
        xy = np.array([[float(r[3]), float(r[4])] for r in body]).reshape(-1, 2)
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: malformed trace row: {exc}") from None
    return cells, xy


def write_trajectory(path, traj: Trajectory, with_controls: bool = True) -> Path:
    """Columns ``k,t`` then the state columns, then ``u1,u2`` when controls exist.

    Controls act between samples, so the final row leaves them empty.
    """
    cols = LINEAR_COLS if traj.kind == "linear" else UNICYCLE_COLS
    header = ["k", "t"] + cols
    ctrl = traj.controls if with_controls else None
    if ctrl is not None:
        header += ["u1", "u2"]
    rows = []
    for k, (t, s) in enumerate(zip(traj.times, traj.states)):
        row = [k, _f(t)] + [_f(v) for v in s]
        if ctrl is not None:
            row += [_f(ctrl[k, 0]), _f(ctrl[k, 1])] if k < len(ctrl) else ["", ""]
        rows.append(row)
    return _write(path, header, rows)


def read_trajectory(path) -> Trajectory:
    header, body = _read(path)
    if header[:2] != ["k", "t"] or len(header) < 6:
        raise InputError(f"{path}: expected columns k,t,x,y,...")
    cols = header[2:6]
    if cols == LINEAR_COLS:
        kind = "linear"
    elif cols == UNICYCLE_COLS:
        kind = "unicycle"
    else:
        raise InputError(f"{path}: unknown state columns {','.join(cols)}")
    try:
        times = np.array([float(r[1]) for r in body])
        states = np.array([[float(v) for v in r[2:6]] for r in body]).reshape(-1, 4)
        controls = None
        if header[6:8] == ["u1", "u2"]:
            controls = np.array([[float(r[6]), float(r[7])] for r in body if r[6] != ""]).reshape(-1, 2)
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: malformed trajectory row: {exc}") from None
    return Trajectory(times, states, kind=kind, controls=controls)


def write_controls(path, controls, ts: float) -> Path:
    u = np.asarray(controls, dtype=float).reshape(-1, 2)
    return _write(path, ["k", "t", "u1", "u2"], [(k, _f(k * ts), _f(a), _f(b)) for k, (a, b) in enumerate(u)])


def read_controls(path) -> np.ndarray:
    _, body = _read(path, ["k", "t", "u1", "u2"])
    return np.array([[float(r[2]), float(r[3])] for r in body]).reshape(-1, 2)


def write_robustness(path, times, rho) -> Path:
    return _write(path, ["t", "rho"], [(_f(t), _f(r)) for t, r in zip(times, rho)])


def read_robustness(path) -> tuple[np.ndarray, np.ndarray]:
    _, body = _read(path, ["t", "rho"])
    arr = np.array([[float(a), float(b)] for a, b in body]).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def write_summary(path, reports) -> Path:
    """Comparison rows without wall time, so reruns produce identical bytes."""
    def cell(v):
        return "" if v is None or (isinstance(v, float) and math.isnan(v)) else _f(v)

    return _write(path, ["planner", "status", "rho", "J"],
                  [(r.planner, r.status, cell(r.rho), cell(r.cost_J)) for r in reports])


def read_summary(path) -> list[dict]:
    header, body = _read(path, ["planner", "status", "rho", "J"])
    out = []
    for r in body:
        out.append({"planner": r[0], "status": r[1],
                    "rho": float(r[2]) if r[2] else None, "J": float(r[3]) if r[3] else None})
    return out
