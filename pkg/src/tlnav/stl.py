"""Offline STL robustness monitoring over uniformly sampled signals.

Concrete syntax::

    alw_[a,b] (phi)    ev_[a,b] (phi)    (phi) until_[a,b] (psi)
    !phi   phi & psi   phi | psi   phi -> psi   true
    2*x - y + 1 > 0    dist < 3

An omitted interval means ``[0, inf)``. Predicates are affine in the signal
components; ``a < b`` is read as ``b - a > 0``. Evaluation is on the sample
grid only and unbounded windows clip to the last sample.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import InputError, SyntaxErrorAt


@dataclass(frozen=True)
class Predicate:
    """``const + sum(coeffs[name] * s[name]) > 0``."""

    coeffs: tuple[tuple[str, float], ...]
    const: float = 0.0

    def value(self, sample: Mapping[str, float]) -> float:
        v = self.const
        for name, c in self.coeffs:
            v = v + c * sample[name]
        return v

    def values(self, columns: Mapping[str, np.ndarray], n: int) -> np.ndarray:
        v = np.full(n, self.const, dtype=float)
        for name, c in self.coeffs:
            v = v + c * columns[name]
        return v

    def __str__(self):
        terms = [f"{c:g}*{n}" for n, c in self.coeffs]
        return " + ".join(terms + [f"{self.const:g}"]) + " > 0"


@dataclass(frozen=True)
class STrue:
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class SNot:
    arg: "StlFormula"


@dataclass(frozen=True)
class SAnd:
    left: "StlFormula"
    right: "StlFormula"


@dataclass(frozen=True)
class SOr:
    left: "StlFormula"
    right: "StlFormula"


@dataclass(frozen=True)
class SImplies:
    left: "StlFormula"
    right: "StlFormula"


@dataclass(frozen=True)
class SEventually:
    arg: "StlFormula"
    a: float = 0.0
    b: float = math.inf

    def __post_init__(self):
        _check_interval(self.a, self.b)


@dataclass(frozen=True)
class SAlways:
    arg: "StlFormula"
    a: float = 0.0
    b: float = math.inf

    def __post_init__(self):
        _check_interval(self.a, self.b)


@dataclass(frozen=True)
class SUntil:
    left: "StlFormula"
    right: "StlFormula"
    a: float = 0.0
    b: float = math.inf

    def __post_init__(self):
        _check_interval(self.a, self.b)


StlFormula = Union[Predicate, STrue, SNot, SAnd, SOr, SImplies, SEventually, SAlways, SUntil]


def _check_interval(a, b):
    if not (0 <= a <= b):
        raise InputError(f"invalid interval [{a}, {b}]: need 0 <= a <= b")


def predicate_names(f: StlFormula) -> set[str]:
    if isinstance(f, Predicate):
        return {n for n, _ in f.coeffs}
    out = set()
    for c in _children(f):
        out |= predicate_names(c)
    return out


def _children(f):
    if isinstance(f, (SAnd, SOr, SImplies, SUntil)):
        return (f.left, f.right)
    if isinstance(f, (SNot, SEventually, SAlways)):
        return (f.arg,)
    return ()


# ---------------------------------------------------------------- parsing

_TOK = re.compile(
    r"\s*(?:(?P<temporal>alw|ev|until)_\[\s*(?P<a>[^,\]]+?)\s*,\s*(?P<b>[^\]]+?)\s*\]"
    r"|(?P<num>\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>->|=>|>=|<=|&&|\|\||[()!&|*+\-<>~])"
    r"|(?P<bad>\S))"
)


def _bound(text, pos, src):
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(t)
    except ValueError:
        raise SyntaxErrorAt(f"bad interval bound {text!r}", pos, src) from None


class _StlParser:
    def __init__(self, text):
        self.text = text
        self.toks = []
        pos = 0
        while True:
            m = _TOK.match(text, pos)
            if m is None:
                break
            if m.group("bad"):
                raise SyntaxErrorAt(f"unknown token {m.group('bad')!r}", m.start("bad"), text)
            if m.group("temporal"):
                a = _bound(m.group("a"), m.start("a"), text)
                b = _bound(m.group("b"), m.start("b"), text)
                if a > b or a < 0:
                    raise InputError(f"invalid interval [{a}, {b}] at position {m.start()}")
                self.toks.append(("T", (m.group("temporal"), a, b), m.start("temporal")))
            elif m.group("num"):
                self.toks.append(("num", float(m.group("num")), m.start("num")))
            elif m.group("ident"):
                word = m.group("ident")
                if word in ("alw", "ev", "until"):
                    self.toks.append(("T", (word, 0.0, math.inf), m.start("ident")))
                elif word in ("and", "or", "not", "implies", "true"):
                    self.toks.append(("kw", word, m.start("ident")))
                else:
                    self.toks.append(("ident", word, m.start("ident")))
            else:
                op = {"&&": "&", "||": "|", "=>": "->", "~": "!"}.get(m.group("op"), m.group("op"))
                self.toks.append(("op", op, m.start("op")))
            pos = m.end()
        self.toks.append(("eof", None, len(text)))
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def take(self):
        t = self.toks[self.k]
        self.k += 1
        return t

    def error(self, msg):
        kind, val, pos = self.peek()
        what = "end of input" if kind == "eof" else repr(val)
        raise SyntaxErrorAt(f"{msg}: unexpected {what}", pos, self.text)

    def is_op(self, *ops):
        kind, val, _ = self.peek()
        return (kind == "op" and val in ops) or (kind == "kw" and val in ops)

    def parse(self):
        f = self.implies()
        if self.peek()[0] != "eof":
            self.error("expected end of formula")
        return f

    def implies(self):
        f = self.disj()
        if self.is_op("->", "implies"):
            self.take()
            return SImplies(f, self.implies())
        return f

    def disj(self):
        f = self.conj()
        while self.is_op("|", "or"):
            self.take()
            f = SOr(f, self.conj())
        return f

    def conj(self):
        f = self.until()
        while self.is_op("&", "and"):
            self.take()
            f = SAnd(f, self.until())
        return f

    def until(self):
        f = self.unary()
        kind, val, _ = self.peek()
        if kind == "T" and val[0] == "until":
            self.take()
            return SUntil(f, self.until(), val[1], val[2])
        return f

    def unary(self):
        kind, val, _ = self.peek()
        if self.is_op("!", "not"):
            self.take()
            return SNot(self.unary())
        if kind == "T" and val[0] in ("alw", "ev"):
            self.take()
            arg = self.unary()
            return SAlways(arg, val[1], val[2]) if val[0] == "alw" else SEventually(arg, val[1], val[2])
        if kind == "kw" and val == "true":
            self.take()
            return STrue()
        if self.is_op("("):
            # Either a parenthesized formula or the start of an affine expression.
            save = self.k
            self.take()
            try:
                f = self.implies()
                if self.is_op(")"):
                    self.take()
                    if not self.is_op(">", ">=", "<", "<=", "+", "-", "*"):
                        return f
            except SyntaxErrorAt:
                pass
            self.k = save
        return self.comparison()

    def comparison(self):
        lhs = self.affine()
        if not self.is_op(">", ">=", "<", "<="):
            self.error("expected comparison")
        op = self.take()[1]
        rhs = self.affine()
        diff = _sub(lhs, rhs) if op in (">", ">=") else _sub(rhs, lhs)
        coeffs = tuple((n, c) for n, c in diff[0].items() if c != 0.0)
        return Predicate(coeffs, diff[1])

    # affine expressions are (dict name->coeff, const)
    def affine(self):
        sign = 1.0
        if self.is_op("-"):
            self.take()
            sign = -1.0
        elif self.is_op("+"):
            self.take()
        acc = _scale(self.term(), sign)
        while self.is_op("+", "-"):
            op = self.take()[1]
            t = self.term()
            acc = _add(acc, t) if op == "+" else _sub(acc, t)
        return acc

    def term(self):
        f = self.factor()
        while self.is_op("*"):
            self.take()
            g = self.factor()
            if f[0] and g[0]:
                self.error("nonlinear product")
            f = _scale(g, f[1]) if not f[0] else _scale(f, g[1])
        return f

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "num":
            self.take()
            return ({}, val)
        if kind == "ident":
            self.take()
            return ({val: 1.0}, 0.0)
        if self.is_op("-"):
            self.take()
            return _scale(self.factor(), -1.0)
        if self.is_op("("):
            self.take()
            e = self.affine()
            if not self.is_op(")"):
                self.error("expected ')'")
            self.take()
            return e
        self.error("expected number or signal name")


def _scale(e, s):
    return ({n: c * s for n, c in e[0].items()}, e[1] * s)


def _add(x, y):
    d = dict(x[0])
    for n, c in y[0].items():
        d[n] = d.get(n, 0.0) + c
    return (d, x[1] + y[1])


def _sub(x, y):
    return _add(x, _scale(y, -1.0))


def parse_stl(text: str) -> StlFormula:
    return _StlParser(text).parse()


# ---------------------------------------------------------------- signals

@dataclass
class Signal:
    names: tuple[str, ...]
    times: np.ndarray
    values: np.ndarray  # shape (n, len(names))

    def __post_init__(self):
        self.names = tuple(self.names)
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.times), len(self.names))
        n = len(self.times)
        if n < 1:
            raise InputError("signal needs at least one sample")
        if n > 1:
            d = np.diff(self.times)
            if np.any(d <= 0):
                raise InputError("signal timestamps must be strictly increasing")
            if np.max(np.abs(d - d[0])) > 1e-9 * max(abs(d[0]), 1.0):
                raise InputError("signal must be uniformly sampled")

    @classmethod
    def from_columns(cls, times, **columns) -> "Signal":
        names = tuple(columns)
        vals = np.column_stack([np.asarray(columns[n], dtype=float) for n in names]) if names else np.zeros((len(times), 0))
        return cls(names, times, vals)

    @property
    def period(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 1.0

    def column(self, name) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def columns(self) -> dict[str, np.ndarray]:
        return {n: self.values[:, k] for k, n in enumerate(self.names)}

    def __len__(self):
        return len(self.times)


@dataclass
class RobustnessResult:
    rho: float
    rho_trace: np.ndarray
    satisfied: bool
    times: np.ndarray | None = None
    details: dict = field(default_factory=dict)


def _steps(a, b, dt):
    """Sample offsets covered by ``[a, b]``; ``hi`` may be inf."""
    lo = math.ceil(a / dt - 1e-9)
    hi = math.inf if math.isinf(b) else math.floor(b / dt + 1e-9)
    return lo, hi


def _valid_last(f, n, dt):
    """Largest sample index at which ``f`` can be evaluated without an empty window."""
    if isinstance(f, (Predicate, STrue)):
        return n - 1
    if isinstance(f, SNot):
        return _valid_last(f.arg, n, dt)
    if isinstance(f, (SAnd, SOr, SImplies)):
        return min(_valid_last(f.left, n, dt), _valid_last(f.right, n, dt))
    if isinstance(f, (SEventually, SAlways)):
        lo, _ = _steps(f.a, f.b, dt)
        return _valid_last(f.arg, n, dt) - lo
    if isinstance(f, SUntil):
        lo, _ = _steps(f.a, f.b, dt)
        right = _valid_last(f.right, n, dt)
        if lo == 0:
            # the witness t' = t needs nothing from the left operand
            return right
        return min(right, _valid_last(f.left, n, dt) + 1) - lo
    raise TypeError(f"not an STL formula: {f!r}")


def _until_end(k, hi, right_last, left_last):
    """Last witness index for Until at ``k``: left must hold on ``[k, t')``."""
    end = min(right_last, max(k, left_last + 1))
    return end if math.isinf(hi) else min(k + hi, end)


def _rho_vec(f, cols, n, dt):
    """Robustness at every sample index ``0..valid_last(f)``."""
    if isinstance(f, Predicate):
        return f.values(cols, n)
    if isinstance(f, STrue):
        return np.full(n, np.inf)
    if isinstance(f, SNot):
        return -_rho_vec(f.arg, cols, n, dt)
    if isinstance(f, (SAnd, SOr, SImplies)):
        l = _rho_vec(f.left, cols, n, dt)
        r = _rho_vec(f.right, cols, n, dt)
        m = min(len(l), len(r))
        l, r = l[:m], r[:m]
        if isinstance(f, SAnd):
            return np.minimum(l, r)
        if isinstance(f, SOr):
            return np.maximum(l, r)
        return np.maximum(-l, r)
    if isinstance(f, (SEventually, SAlways)):
        inner = _rho_vec(f.arg, cols, n, dt)
        last = len(inner) - 1
        lo, hi = _steps(f.a, f.b, dt)
        reduce = np.max if isinstance(f, SEventually) else np.min
        out = np.empty(max(last - lo + 1, 0))
        for k in range(len(out)):
            end = last if math.isinf(hi) else min(k + hi, last)
            out[k] = reduce(inner[k + lo:end + 1])
        return out
    if isinstance(f, SUntil):
        left = _rho_vec(f.left, cols, n, dt)
        right = _rho_vec(f.right, cols, n, dt)
        lo, hi = _steps(f.a, f.b, dt)
        out = np.empty(max(_valid_last(f, n, dt) + 1, 0))
        for k in range(len(out)):
            end = _until_end(k, hi, len(right) - 1, len(left) - 1)
            # running min of left over [k, t')
            best = -np.inf
            run = np.inf
            for tp in range(k, end + 1):
                if tp >= k + lo:
                    best = max(best, min(right[tp], run))
                if tp < len(left):
                    run = min(run, left[tp])
            out[k] = best
        return out
    raise TypeError(f"not an STL formula: {f!r}")


def robustness(f: StlFormula, s: Signal, t: float | None = None) -> RobustnessResult:
    """Quantitative robustness of ``f`` on ``s``, evaluated at time ``t``.

    ``t`` defaults to the first sample. ``rho_trace`` holds the robustness at
    every sample where all windows are nonempty.
    """
    missing = predicate_names(f) - set(s.names)
    if missing:
        raise InputError(f"formula references undeclared signals: {sorted(missing)}")
    n, dt = len(s), s.period
    t0 = float(s.times[0])
    t = t0 if t is None else float(t)
    k = (t - t0) / dt
    ki = int(round(k))
    if abs(k - ki) > 1e-6 or ki < 0 or ki >= n:
        raise InputError(f"time {t} is not on the sampling grid")
    last = _valid_last(f, n, dt)
    if ki > last:
        raise InputError(f"empty evaluation window at time {t} after clipping to the horizon")
    trace = _rho_vec(f, s.columns(), n, dt)
    rho = float(trace[ki])
    return RobustnessResult(rho=rho, rho_trace=trace, satisfied=rho > 0, times=s.times[: len(trace)])


def satisfies(f: StlFormula, s: Signal, k: int = 0) -> bool:
    """Boolean semantics at sample ``k`` with predicates read as ``f(s) > 0``."""
    n, dt = len(s), s.period
    cols = s.columns()

    def sat(g, k):
        if isinstance(g, Predicate):
            return g.value({nm: cols[nm][k] for nm in cols}) > 0
        if isinstance(g, STrue):
            return True
        if isinstance(g, SNot):
            return not sat(g.arg, k)
        if isinstance(g, SAnd):
            return sat(g.left, k) and sat(g.right, k)
        if isinstance(g, SOr):
            return sat(g.left, k) or sat(g.right, k)
        if isinstance(g, SImplies):
            return (not sat(g.left, k)) or sat(g.right, k)
        lo, hi = _steps(g.a, g.b, dt)
        if isinstance(g, (SEventually, SAlways)):
            last = _valid_last(g.arg, n, dt)
            end = last if math.isinf(hi) else min(k + hi, last)
            window = range(k + lo, end + 1)
            agg = any if isinstance(g, SEventually) else all
            return agg(sat(g.arg, tp) for tp in window)
        if isinstance(g, SUntil):
            end = _until_end(k, hi, _valid_last(g.right, n, dt), _valid_last(g.left, n, dt))
            return any(
                sat(g.right, tp) and all(sat(g.left, u) for u in range(k, tp))
                for tp in range(k + lo, end + 1)
            )
        raise TypeError(g)

    return sat(f, k)


def conj(*fs: StlFormula) -> StlFormula:
    out = fs[0]
    for g in fs[1:]:
        out = SAnd(out, g)
    return out


def sequenced_reach(goal_signals: Sequence[str]) -> StlFormula:
    """``ev(g1 > 0 & ev(g2 > 0 & ...))`` over goal-depth signals."""
    f = SEventually(Predicate(((goal_signals[-1], 1.0),), 0.0))
    for g in reversed(goal_signals[:-1]):
        f = SEventually(SAnd(Predicate(((g, 1.0),), 0.0), f))
    return f
