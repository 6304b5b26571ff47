"""Counterexample-based path planning on the grid transition system.

The planner asks whether "no run of the grid satisfies phi" holds. A shortest
counterexample to that claim is a shortest run that does satisfy phi, and it
becomes the reference path.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Union

from .env import OBSTACLE, Cell, OccupancyGrid, cell_to_world, region_labels
from .errors import InputError, NoPathError
from .ltl import LtlFormula, Not, compile_to_dfa, eval_finite_trace, goal_sequence, split_spec

log = logging.getLogger(__name__)

# Move order doubles as the tie-break order: up, down, left, right.
MOVES = ((0, 1), (0, -1), (-1, 0), (1, 0))

CellTrace = list  # list[Cell], consecutive cells 4-adjacent


@dataclass(frozen=True)
class TransitionSystem:
    states: tuple[Cell, ...]
    initial: Cell
    successors: dict[Cell, tuple[Cell, ...]]
    labeling: dict[Cell, frozenset[str]]

    def with_initial(self, start: Cell) -> "TransitionSystem":
        if start not in self.successors:
            raise InputError(f"start cell {tuple(start)} is occupied or out of bounds")
        return TransitionSystem(self.states, Cell(*start), self.successors, self.labeling)


def build_transition_system(grid: OccupancyGrid, start) -> TransitionSystem:
    """Free cells with 4-connected moves; nothing enters an obstacle or leaves the map."""
    start = Cell(int(start[0]), int(start[1]))
    if not grid.in_bounds(start) or not grid.is_free(start):
        raise InputError(f"start cell {tuple(start)} is occupied or out of bounds")
    states = []
    succ = {}
    labeling = {}
    for i in range(grid.width):
        for j in range(grid.height):
            c = Cell(i, j)
            if not grid.is_free(c):
                continue
            states.append(c)
            succ[c] = tuple(
                Cell(i + di, j + dj) for di, dj in MOVES if grid.is_free((i + di, j + dj))
            )
            labeling[c] = region_labels(c, grid)
    return TransitionSystem(tuple(states), start, succ, labeling)


@dataclass(frozen=True)
class Holds:
    """The negated specification holds: no finite run satisfies phi."""


@dataclass(frozen=True)
class Counterexample:
    trace: list


Verdict = Union[Holds, Counterexample]


def model_check(ts: TransitionSystem, phi: LtlFormula) -> Verdict:
    """Check the claim ``!phi`` on every finite run from ``ts.initial``.

    Returns a shortest violating run (which satisfies ``phi``) or ``Holds``.
    Top-level ``G(!a)`` conjuncts prune labeled states instead of entering the
    automaton. Ties between equally short runs follow the move order and then
    the automaton-state numbering.
    """
    reach, avoid = split_spec(phi)
    avoid = avoid | {OBSTACLE}
    dfa = compile_to_dfa(reach)

    def allowed(c):
        return not (ts.labeling[c] & avoid)

    start = ts.initial
    if not allowed(start):
        return Holds()
    root = (start, dfa.step(dfa.initial, ts.labeling[start]))
    parent = {root: None}
    queue = deque([root])
    while queue:
        node = queue.popleft()
        cell, q = node
        if q in dfa.accepting:
            path = []
            while node is not None:
                path.append(node[0])
                node = parent[node]
            return Counterexample(path[::-1])
        for nxt in ts.successors[cell]:
            if not allowed(nxt):
                continue
            child = (nxt, dfa.step(q, ts.labeling[nxt]))
            if child not in parent:
                parent[child] = node
                queue.append(child)
    return Holds()


def plan_path(grid: OccupancyGrid, phi: LtlFormula, start, ts: TransitionSystem | None = None) -> list[Cell]:
    """Shortest grid path satisfying ``phi`` from ``start``.

    ``ts`` may carry a transition system already built for ``grid``; only its
    initial state is replaced.
    """
    ts = build_transition_system(grid, start) if ts is None else ts.with_initial(Cell(*start))
    verdict = model_check(ts, phi)
    if isinstance(verdict, Holds):
        raise NoPathError(f"no path satisfies specification; {Not(phi)} holds on this map")
    trace = verdict.trace
    log.info("counterexample to %s found with %d states", Not(phi), len(trace))
    assert eval_finite_trace(phi, [region_labels(c, grid) for c in trace])
    return trace


def trace_rows(trace, grid: OccupancyGrid):
    """CSV rows ``step,i,j,x,y`` with cell-center coordinates."""
    rows = []
    for step, c in enumerate(trace):
        x, y = cell_to_world(c, grid)
        rows.append((step, c[0], c[1], x, y))
    return rows


def witness_goals(phi: LtlFormula, labels) -> list[str]:
    """Goal labels in the order a run uses them to make progress on ``phi``.

    Runs the reachability automaton over ``labels`` (one label set per step)
    and, each time its state changes, records the automaton's atoms present
    at that step. For ``visit a then b`` this is ``[a, b]``; for
    ``F(a U b)`` reached straight through ``b`` it is ``[b]``. Falls back to
    every goal atom when the run is not accepted.
    """
    reach, avoid = split_spec(phi)
    dfa = compile_to_dfa(reach)
    goals = sorted(set(dfa.atoms) - avoid - {OBSTACLE})
    out: list[str] = []
    q = dfa.initial
    for lab in labels:
        nq = dfa.step(q, lab)
        if nq != q:
            out += [g for g in goals if g in lab and (not out or out[-1] != g)]
        q = nq
    if q not in dfa.accepting:
        return goal_sequence(phi)
    return out
