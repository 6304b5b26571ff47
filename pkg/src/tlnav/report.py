"""Planner comparison records and their plain-text table."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class PlannerReport:
    planner: str
    rho: float | None
    wall_time: float
    cost_J: float | None = None
    status: str = "ok"

    def __post_init__(self):
        if self.wall_time < 0:
            raise ValueError("wall_time must be nonnegative")

    def line(self) -> str:
        return (f"planner={self.planner} status={self.status} rho={_num(self.rho)} "
                f"T={_num(self.wall_time)} J={_num(self.cost_J)}")


def _num(v, digits=2):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-"
    return f"{v:.{digits}f}"


def format_table(reports: list[PlannerReport]) -> str:
    """Columns ``Planner | rho(phi) | T(s) | J``; failed planners show their status."""
    header = ("Planner", "rho(phi)", "T(s)", "J")
    rows = []
    for r in reports:
        if r.status != "ok":
            rows.append((r.planner, r.status, _num(r.wall_time), "-"))
        else:
            rows.append((r.planner, _num(r.rho), _num(r.wall_time), _num(r.cost_J)))
    widths = [max(len(str(x[c])) for x in [header] + rows) for c in range(4)]
    sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"

    def fmt(row):
        return "| " + " | ".join(str(v).ljust(w) for v, w in zip(row, widths)) + " |"

    lines = [sep, fmt(header), sep]
    lines += [fmt(r) for r in rows]
    lines.append(sep)
    return "\n".join(lines) + "\n"
