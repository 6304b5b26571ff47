"""Mixed-integer linear programs with binary variables.

``MilpBuilder`` assembles a problem, ``solve_lp`` solves its relaxation with a
dense two-phase primal simplex (Bland's rule), ``solve`` runs best-first
branch-and-bound on the binaries, and ``export_lp``/``parse_lp`` read and
write the CPLEX LP text format.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import logging
import math
import re
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .errors import InputError, NumericalError

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
INT_TOL = 1e-6


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    TIME_LIMIT = "TimeLimit"


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float
    ub: float
    kind: str = "continuous"  # or "binary"


@dataclass(eq=False)
class MilpProblem:
    """Minimize ``c @ x + obj_const`` subject to ``A x (sense) rhs`` and bounds.

    ``sense`` entries are ``"<="``, ``"="`` or ``">="``.
    """

    variables: list[Variable]
    A: sp.csr_matrix
    sense: list[str]
    rhs: np.ndarray
    c: np.ndarray
    obj_const: float = 0.0
    row_names: list[str] = field(default_factory=list)
    name: str = "problem"

    def __post_init__(self):
        self.index = {v.name: k for k, v in enumerate(self.variables)}

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def m(self) -> int:
        return len(self.rhs)

    @property
    def lb(self) -> np.ndarray:
        return np.array([v.lb for v in self.variables], dtype=float)

    @property
    def ub(self) -> np.ndarray:
        return np.array([v.ub for v in self.variables], dtype=float)

    @property
    def binaries(self) -> np.ndarray:
        return np.array([k for k, v in enumerate(self.variables) if v.kind == "binary"], dtype=int)

    def objective(self, x) -> float:
        return float(self.c @ x + self.obj_const)

    def max_violation(self, x) -> float:
        """Largest constraint or bound violation of ``x``."""
        x = np.asarray(x, dtype=float)
        ax = self.A @ x
        viol = [0.0]
        for s, lhs, r in zip(self.sense, ax, self.rhs):
            if s == "<=":
                viol.append(lhs - r)
            elif s == ">=":
                viol.append(r - lhs)
            else:
                viol.append(abs(lhs - r))
        viol.append(float(np.max(self.lb - x, initial=0.0)))
        viol.append(float(np.max(x - self.ub, initial=0.0)))
        return max(viol)

    def is_feasible(self, x, tol: float = 1e-6) -> bool:
        x = np.asarray(x, dtype=float)
        if self.max_violation(x) > tol:
            return False
        b = self.binaries
        return bool(np.all(np.abs(x[b] - np.round(x[b])) <= tol))

    def relaxation(self) -> "MilpProblem":
        vs = [Variable(v.name, v.lb, v.ub, "continuous") for v in self.variables]
        return MilpProblem(vs, self.A, list(self.sense), self.rhs, self.c, self.obj_const, list(self.row_names), self.name)

    def dense(self):
        return self.A.toarray()


class MilpBuilder:
    def __init__(self, name: str = "problem"):
        self.name = name
        self._vars: list[Variable] = []
        self._index: dict[str, int] = {}
        self._rows: list[tuple[np.ndarray, np.ndarray]] = []
        self._sense: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []
        self._obj: dict[int, float] = {}
        self._obj_const = 0.0

    def add_variable(self, name: str, lb: float = 0.0, ub: float = math.inf, kind: str = "continuous") -> int:
        if name in self._index:
            raise InputError(f"duplicate variable name {name!r}")
        if kind not in ("continuous", "binary"):
            raise InputError(f"unknown variable kind {kind!r}")
        if kind == "binary" and (lb, ub) != (0, 1):
            warnings.warn(f"binary variable {name!r} bounds [{lb}, {ub}] normalized to [0, 1]", stacklevel=2)
            lb, ub = 0.0, 1.0
        if not (math.isfinite(lb) and math.isfinite(ub)):
            raise InputError(f"variable {name!r} needs finite bounds, got [{lb}, {ub}]")
        if lb > ub:
            raise InputError(f"variable {name!r} has lb > ub")
        self._index[name] = len(self._vars)
        self._vars.append(Variable(name, float(lb), float(ub), kind))
        return self._index[name]

    def var(self, name: str) -> int:
        return self._index[name]

    def _resolve(self, terms) -> tuple[np.ndarray, np.ndarray]:
        items = terms.items() if isinstance(terms, Mapping) else terms
        cols, vals = [], []
        for key, coef in items:
            if isinstance(key, str):
                if key not in self._index:
                    raise InputError(f"constraint references undeclared variable {key!r}")
                key = self._index[key]
            elif not 0 <= key < len(self._vars):
                raise InputError(f"constraint references undeclared variable index {key}")
            cols.append(int(key))
            vals.append(float(coef))
        return np.array(cols, dtype=int), np.array(vals, dtype=float)

    def add_constraint(self, terms, sense: str, rhs: float, name: str | None = None) -> int:
        sense = {"<": "<=", "=<": "<=", ">": ">=", "=>": ">=", "==": "="}.get(sense, sense)
        if sense not in ("<=", "=", ">="):
            raise InputError(f"unknown relation {sense!r}")
        cols, vals = self._resolve(terms)
        self._rows.append((cols, vals))
        self._sense.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(name or f"c{len(self._rows) - 1}")
        return len(self._rows) - 1

    def set_objective(self, terms, constant: float = 0.0) -> None:
        cols, vals = self._resolve(terms)
        self._obj = {}
        for c, v in zip(cols, vals):
            self._obj[c] = self._obj.get(c, 0.0) + v
        self._obj_const = float(constant)

    def build(self) -> MilpProblem:
        n = len(self._vars)
        if self._rows:
            r = np.concatenate([np.full(len(c), k) for k, (c, _) in enumerate(self._rows)])
            cidx = np.concatenate([c for c, _ in self._rows])
            vals = np.concatenate([v for _, v in self._rows])
        else:
            r = cidx = np.zeros(0, dtype=int)
            vals = np.zeros(0)
        A = sp.csr_matrix((vals, (r, cidx)), shape=(len(self._rows), n))
        A.sum_duplicates()
        c = np.zeros(n)
        for k, v in self._obj.items():
            c[k] = v
        return MilpProblem(list(self._vars), A, list(self._sense), np.array(self._rhs, dtype=float),
                           c, self._obj_const, list(self._row_names), self.name)


@dataclass
class MilpSolution:
    status: Status
    x: np.ndarray | None = None
    objective: float = math.nan
    gap: float = math.nan
    bound: float = math.nan
    nodes: int = 0
    names: dict[str, int] | None = None
    # (relaxation bound, incumbent objective) for each node taken off the queue
    node_log: list[tuple[float, float]] = field(default_factory=list)

    def value(self, name: str) -> float:
        return float(self.x[self.names[name]])

    @property
    def ok(self) -> bool:
        return self.status == Status.OPTIMAL


# ---------------------------------------------------------------- simplex

class _Tableau:
    """Dense simplex tableau in canonical form with Bland's pivoting rule."""

    def __init__(self, T, basis, tol=FEAS_TOL, max_iter=50_000):
        self.T = T
        self.basis = basis
        self.tol = tol
        self.max_iter = max_iter

    def set_costs(self, cost):
        m = len(self.basis)
        T = self.T
        T[m, :-1] = cost
        T[m, -1] = 0.0
        for r, j in enumerate(self.basis):
            if cost[j] != 0.0:
                T[m] -= cost[j] * T[r]

    def pivot(self, r, j):
        T = self.T
        p = T[r, j]
        if abs(p) < 1e-12:
            raise NumericalError(f"pivot element {p:.3g} at row {r}, column {j} too small")
        T[r] /= p
        col = T[:, j].copy()
        col[r] = 0.0
        nz = np.nonzero(col)[0]
        if len(nz):
            T[nz] -= np.outer(col[nz], T[r])
        self.basis[r] = j

    def run(self, allowed):
        """Minimize; returns False if unbounded."""
        m = len(self.basis)
        T = self.T
        for _ in range(self.max_iter):
            d = T[m, :-1]
            cand = np.nonzero((d < -self.tol) & allowed)[0]
            if len(cand) == 0:
                return True
            j = cand[0]
            col = T[:m, j]
            rows = np.nonzero(col > self.tol)[0]
            if len(rows) == 0:
                return False
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + self.tol * max(1.0, abs(best))]
            r = min(ties, key=lambda i: self.basis[i])
            self.pivot(r, j)
        raise NumericalError(f"simplex iteration limit {self.max_iter} reached")


def _highs_lp(problem, lb, ub):
    from scipy.optimize import linprog

    A = problem.A
    le = [k for k, s in enumerate(problem.sense) if s == "<="]
    ge = [k for k, s in enumerate(problem.sense) if s == ">="]
    eq = [k for k, s in enumerate(problem.sense) if s == "="]
    a_ub = sp.vstack([A[le], -A[ge]]).tocsr() if (le or ge) else None
    b_ub = np.concatenate([problem.rhs[le], -problem.rhs[ge]]) if (le or ge) else None
    res = linprog(
        problem.c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=A[eq] if eq else None,
        b_eq=problem.rhs[eq] if eq else None,
        bounds=np.column_stack([lb, ub]),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9},
    )
    if res.status == 0:
        return MilpSolution(Status.OPTIMAL, res.x, float(res.fun + problem.obj_const), 0.0,
                            float(res.fun + problem.obj_const), names=problem.index)
    if res.status == 2:
        return MilpSolution(Status.INFEASIBLE, names=problem.index)
    if res.status == 3:
        return MilpSolution(Status.UNBOUNDED, names=problem.index)
    raise NumericalError(f"HiGHS LP failed: {res.message}")


def solve_lp(problem: MilpProblem, lb=None, ub=None, method: str = "simplex") -> MilpSolution:
    """Solve the continuous relaxation, optionally with overridden bounds.

    ``method="simplex"`` uses the bundled dense two-phase simplex;
    ``method="highs"`` delegates to SciPy's HiGHS for large relaxations.
    """
    lb = problem.lb if lb is None else np.asarray(lb, dtype=float)
    ub = problem.ub if ub is None else np.asarray(ub, dtype=float)
    if np.any(lb > ub + FEAS_TOL):
        return MilpSolution(Status.INFEASIBLE, names=problem.index)
    if method == "highs":
        return _highs_lp(problem, lb, ub)
    if method != "simplex":
        raise InputError(f"unknown LP method {method!r}")
    return _simplex(problem, lb, np.maximum(ub, lb))


def _simplex(problem, lb, ub):
    n, m = problem.n, problem.m
    A = problem.A.toarray()
    r = problem.rhs - A @ lb
    span = ub - lb
    sense = list(problem.sense)

    n_slack = sum(1 for s in sense if s != "=")
    # columns: z (n) | w upper slacks (n) | row slacks | artificials
    rows = m + n
    width = 2 * n + n_slack
    art_rows = []
    T_rows = np.zeros((rows, width))
    rhs = np.zeros(rows)
    basis = [-1] * rows
    k = 2 * n
    for i in range(m):
        row = A[i].copy()
        b = r[i]
        s = sense[i]
        slack_col = None
        if s != "=":
            slack_col = k
            k += 1
            T_rows[i, slack_col] = 1.0 if s == "<=" else -1.0
        T_rows[i, :n] = row
        rhs[i] = b
        if b < 0:
            T_rows[i] *= -1.0
            rhs[i] = -b
        if slack_col is not None and T_rows[i, slack_col] > 0:
            basis[i] = slack_col
        else:
            art_rows.append(i)
    for i in range(n):
        T_rows[m + i, i] = 1.0
        T_rows[m + i, n + i] = 1.0
        rhs[m + i] = span[i]
        basis[m + i] = n + i

    n_art = len(art_rows)
    total = width + n_art
    T = np.zeros((rows + 1, total + 1))
    T[:rows, :width] = T_rows
    T[:rows, -1] = rhs
    for a, i in enumerate(art_rows):
        T[i, width + a] = 1.0
        basis[i] = width + a
    tab = _Tableau(T, basis)

    if n_art:
        cost1 = np.zeros(total)
        cost1[width:] = 1.0
        tab.set_costs(cost1)
        tab.run(np.ones(total, dtype=bool))
        if -tab.T[rows, -1] > 1e-7:
            return MilpSolution(Status.INFEASIBLE, names=problem.index)
        # drive remaining artificials out of the basis
        keep = []
        for i in range(rows):
            if tab.basis[i] >= width:
                cand = np.nonzero(np.abs(tab.T[i, :width]) > 1e-9)[0]
                if len(cand):
                    tab.pivot(i, cand[0])
                    keep.append(i)
                # else: redundant row, dropped below
            else:
                keep.append(i)
        T2 = np.vstack([tab.T[keep][:, list(range(width)) + [total]], np.zeros((1, width + 1))])
        tab = _Tableau(T2, [tab.basis[i] for i in keep])
        rows = len(keep)

    cost = np.zeros(width)
    cost[:n] = problem.c
    tab.set_costs(cost)
    if not tab.run(np.ones(width, dtype=bool)):
        return MilpSolution(Status.UNBOUNDED, names=problem.index)
    z = np.zeros(width)
    for i, j in enumerate(tab.basis):
        z[j] = tab.T[i, -1]
    x = lb + z[:n]
    x = np.minimum(np.maximum(x, lb), ub)
    obj = problem.objective(x)
    return MilpSolution(Status.OPTIMAL, x, obj, 0.0, obj, names=problem.index)


# ---------------------------------------------------------------- branch and bound

@dataclass
class SolveOptions:
    abs_gap: float = 1e-6
    time_limit: float | None = None
    lp_method: str = "simplex"
    node_limit: int | None = None
    # optional {variable index: 0/1} tried first as a primal heuristic
    incumbent_hint: dict | None = None


def _most_fractional(x, binaries):
    frac = np.abs(x[binaries] - np.round(x[binaries]))
    if len(frac) == 0 or frac.max() <= INT_TOL:
        return None
    # closest to 0.5; ties go to the lowest variable index
    score = np.abs(x[binaries] - np.floor(x[binaries]) - 0.5)
    cand = binaries[(frac > INT_TOL) & (score <= score[frac > INT_TOL].min() + 1e-12)]
    return int(cand.min())


def solve(problem: MilpProblem, options: SolveOptions | None = None, **kwargs) -> MilpSolution:
    """Best-first branch-and-bound over binary variables.

    Each node's LP relaxation is solved when the node is created, so the
    queue is ordered by true node bounds. Stops once the best open bound is
    within ``abs_gap`` of the incumbent, or at ``time_limit`` seconds.
    """
    opts = options or SolveOptions()
    for k, v in kwargs.items():
        setattr(opts, k, v)
    t0 = time.perf_counter()
    binaries = problem.binaries
    base_lb, base_ub = problem.lb, problem.ub

    def lp(lb, ub):
        return solve_lp(problem, lb, ub, method=opts.lp_method)

    root = lp(base_lb, base_ub)
    if root.status != Status.OPTIMAL:
        root.nodes = 1
        return root
    counter = itertools.count()
    heap = [(root.objective, next(counter), base_lb, base_ub, root)]
    incumbent = None
    inc_obj = math.inf
    nodes = 1
    if opts.incumbent_hint:
        hlb, hub = base_lb.copy(), base_ub.copy()
        for j, val in opts.incumbent_hint.items():
            hlb[j] = hub[j] = float(val)
        hint = lp(hlb, hub)
        nodes += 1
        if hint.status == Status.OPTIMAL and _most_fractional(hint.x, binaries) is None:
            incumbent, inc_obj = hint, hint.objective
    node_log = []
    status = Status.OPTIMAL
    while heap:
        bound = heap[0][0]
        if bound >= inc_obj - opts.abs_gap:
            break
        if opts.time_limit is not None and time.perf_counter() - t0 > opts.time_limit:
            status = Status.TIME_LIMIT
            break
        if opts.node_limit is not None and nodes >= opts.node_limit:
            status = Status.TIME_LIMIT
            break
        bound, _, lb, ub, sol = heapq.heappop(heap)
        node_log.append((bound, inc_obj))
        j = _most_fractional(sol.x, binaries)
        if j is None:
            if sol.objective < inc_obj:
                incumbent, inc_obj = sol, sol.objective
            continue
        for val in (0.0, 1.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = val
            child = lp(clb, cub)
            nodes += 1
            if child.status != Status.OPTIMAL:
                continue
            if child.objective >= inc_obj - opts.abs_gap:
                continue
            if _most_fractional(child.x, binaries) is None:
                if child.objective < inc_obj:
                    incumbent, inc_obj = child, child.objective
                continue
            heapq.heappush(heap, (child.objective, next(counter), clb, cub, child))

    best_bound = min([heap[0][0]] if heap else [], default=inc_obj)
    best_bound = min(best_bound, inc_obj)
    log.debug("branch-and-bound: %d nodes, incumbent %s", nodes, inc_obj)
    if incumbent is None:
        if status == Status.TIME_LIMIT:
            return MilpSolution(Status.TIME_LIMIT, nodes=nodes, names=problem.index, node_log=node_log)
        return MilpSolution(Status.INFEASIBLE, nodes=nodes, names=problem.index, node_log=node_log)
    return MilpSolution(
        status,
        incumbent.x,
        inc_obj,
        max(inc_obj - best_bound, 0.0),
        best_bound,
        nodes,
        problem.index,
        node_log,
    )


# ---------------------------------------------------------------- LP file format

_NAME_OK = re.compile(r"^[A-Za-z!\"#$%&()/,.;?@_`'{}|~][A-Za-z0-9!\"#$%&()/,.;?@_`'{}|~]*$")


def _fmt(v: float) -> str:
    return format(v, ".17g")


def _expr(cols, vals, names):
    parts = []
    for c, v in zip(cols, vals):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(v))} {names[c]}")
    if not parts:
        return "0 " + names[0] if names else "0"
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else s


def format_lp(problem: MilpProblem) -> str:
    names = [v.name for v in problem.variables]
    for nm in names + problem.row_names:
        if not _NAME_OK.match(nm):
            raise InputError(f"name {nm!r} is not valid in LP format")
    out = [f"\\ {problem.name}", "Minimize"]
    nz = np.nonzero(problem.c)[0]
    obj = _expr(nz, problem.c[nz], names)
    if problem.obj_const:
        obj += f" {'-' if problem.obj_const < 0 else '+'} {_fmt(abs(problem.obj_const))}"
    out.append(f" obj: {obj}")
    out.append("Subject To")
    A = problem.A.tocsr()
    for i in range(problem.m):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        expr = _expr(A.indices[lo:hi], A.data[lo:hi], names)
        out.append(f" {problem.row_names[i]}: {expr} {problem.sense[i]} {_fmt(problem.rhs[i])}")
    out.append("Bounds")
    for v in problem.variables:
        if v.kind == "continuous":
            out.append(f" {_fmt(v.lb)} <= {v.name} <= {_fmt(v.ub)}")
    bins = [v.name for v in problem.variables if v.kind == "binary"]
    if bins:
        out.append("Binary")
        out.extend(f" {b}" for b in bins)
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(problem: MilpProblem, path) -> Path:
    path = Path(path)
    path.write_text(format_lp(problem), encoding="utf-8")
    return path


def _parse_expr(text):
    """Linear expression -> (list of (name, coef), constant)."""
    toks = text.split()
    terms, const = [], 0.0
    sign = 1.0
    coef = None
    for tok in toks:
        if tok in ("+", "-"):
            sign = 1.0 if tok == "+" else -1.0
            continue
        try:
            val = float(tok)
        except ValueError:
            terms.append((tok, sign * (1.0 if coef is None else coef)))
            sign, coef = 1.0, None
            continue
        if coef is not None:
            const += sign * coef
            sign = 1.0
        coef = val
    if coef is not None:
        const += sign * coef
    return terms, const


def parse_lp(text: str) -> MilpProblem:
    """Parse the subset of the LP format written by ``format_lp``."""
    section = None
    name = "problem"
    obj_line = ""
    rows = []
    bounds = {}
    binaries = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            if section is None:
                name = line[1:].strip() or name
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "binary", "binaries", "end"):
            section = low
            continue
        if section == "minimize":
            obj_line += " " + line.split(":", 1)[-1]
        elif section == "subject to":
            label, body = line.split(":", 1)
            m = re.match(r"(.*?)(<=|>=|=)\s*(\S+)\s*$", body)
            if not m:
                raise InputError(f"cannot parse constraint {line!r}")
            terms, _ = _parse_expr(m.group(1))
            rows.append((label.strip(), terms, m.group(2), float(m.group(3))))
        elif section == "bounds":
            m = re.match(r"(\S+)\s*<=\s*(\S+)\s*<=\s*(\S+)$", line)
            if not m:
                raise InputError(f"cannot parse bound {line!r}")
            bounds[m.group(2)] = (float(m.group(1)), float(m.group(3)))
        elif section in ("binary", "binaries"):
            binaries.extend(line.split())
    obj_terms, obj_const = _parse_expr(obj_line)

    b = MilpBuilder(name)
    # variable order: first appearance across objective, constraints and bounds
    seen = []
    for nm, _ in obj_terms:
        if nm not in seen:
            seen.append(nm)
    for _, terms, _, _ in rows:
        for nm, _ in terms:
            if nm not in seen:
                seen.append(nm)
    for nm in list(bounds) + binaries:
        if nm not in seen:
            seen.append(nm)
    binset = set(binaries)
    for nm in seen:
        if nm in binset:
            b.add_variable(nm, 0.0, 1.0, "binary")
        elif nm in bounds:
            b.add_variable(nm, *bounds[nm])
        else:
            raise InputError(f"variable {nm!r} has no bounds")
    for label, terms, sense, rhs in rows:
        b.add_constraint(terms, sense, rhs, name=label)
    b.set_objective(obj_terms, obj_const)
    return b.build()


def reorder_like(problem: MilpProblem, reference: MilpProblem) -> MilpProblem:
    """Permute variables of ``problem`` into the order used by ``reference``."""
    perm = [problem.index[v.name] for v in reference.variables]
    A = problem.A[:, perm].tocsr()
    A.sort_indices()
    return MilpProblem([problem.variables[k] for k in perm], A, list(problem.sense),
                       problem.rhs.copy(), problem.c[perm], problem.obj_const, list(problem.row_names), problem.name)
