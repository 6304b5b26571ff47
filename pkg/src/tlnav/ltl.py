"""LTL over finite traces: parsing, negation normal form, evaluation, DFA compilation.

Concrete syntax::

    !a   a & b   a | b   X a   a U b   F a   G a   true   false   ( ... )
    visit a then b then c

Precedence is unary > ``U`` > ``&`` > ``|``; ``U`` associates to the right.
``visit a then b then c`` is sugar for ``F(a & X F(b & X F c))``.
"""

from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .errors import InputError, SyntaxErrorAt, UnsupportedFragment


@dataclass(frozen=True)
class TrueF:
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class FalseF:
    def __str__(self):
        return "false"


@dataclass(frozen=True)
class Atom:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Not:
    arg: "LtlFormula"

    def __str__(self):
        return f"!{_wrap(self.arg)}"


@dataclass(frozen=True)
class And:
    left: "LtlFormula"
    right: "LtlFormula"

    def __str__(self):
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class Or:
    left: "LtlFormula"
    right: "LtlFormula"

    def __str__(self):
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class Next:
    arg: "LtlFormula"

    def __str__(self):
        return f"X {_wrap(self.arg)}"


@dataclass(frozen=True)
class WeakNext:
    """Holds at the last position, otherwise like ``Next``. Only produced by ``to_nnf``."""

    arg: "LtlFormula"

    def __str__(self):
        return f"!X !{_wrap(self.arg)}"


@dataclass(frozen=True)
class Until:
    left: "LtlFormula"
    right: "LtlFormula"

    def __str__(self):
        return f"({self.left} U {self.right})"


@dataclass(frozen=True)
class Eventually:
    arg: "LtlFormula"

    def __str__(self):
        return f"F {_wrap(self.arg)}"


@dataclass(frozen=True)
class Always:
    arg: "LtlFormula"

    def __str__(self):
        return f"G {_wrap(self.arg)}"


LtlFormula = Union[TrueF, FalseF, Atom, Not, And, Or, Next, WeakNext, Until, Eventually, Always]

TRUE = TrueF()
FALSE = FalseF()


def _wrap(f):
    s = str(f)
    if isinstance(f, (Atom, TrueF, FalseF)) or s.startswith("("):
        return s
    return f"({s})"


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_.]*)|(?P<op>[()!&|~])|(?P<bad>\S))")
_KEYWORDS = {"X", "U", "F", "G", "true", "false", "visit", "then"}


def _tokenize(text):
    toks = []
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        if m.group("bad") is not None:
            raise SyntaxErrorAt(f"unknown token {m.group('bad')!r}", m.start("bad"), text)
        kind = "ident" if m.group("ident") else "op"
        toks.append((m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(("<eof>", len(text)))
    return toks


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.toks[self.k][0]

    def take(self):
        tok = self.toks[self.k]
        self.k += 1
        return tok

    def error(self, msg):
        tok, pos = self.toks[self.k]
        if tok == "<eof>":
            raise SyntaxErrorAt(f"{msg}: unexpected end of input", pos, self.text)
        raise SyntaxErrorAt(f"{msg}: unexpected {tok!r}", pos, self.text)

    def parse(self):
        f = self.disj()
        if self.peek() != "<eof>":
            self.error("expected end of formula")
        return f

    def disj(self):
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self):
        f = self.until()
        while self.peek() == "&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self):
        f = self.unary()
        if self.peek() == "U":
            self.take()
            return Until(f, self.until())
        return f

    def unary(self):
        tok = self.peek()
        if tok in ("!", "~"):
            self.take()
            return Not(self.unary())
        if tok == "X":
            self.take()
            return Next(self.unary())
        if tok == "F":
            self.take()
            return Eventually(self.unary())
        if tok == "G":
            self.take()
            return Always(self.unary())
        if tok == "visit":
            self.take()
            goals = [self.atom_name()]
            while self.peek() == "then":
                self.take()
                goals.append(self.atom_name())
            return sequential_visit(goals)
        return self.primary()

    def atom_name(self):
        tok = self.peek()
        if tok in _KEYWORDS or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.]*", tok):
            self.error("expected atomic proposition")
        return self.take()[0]

    def primary(self):
        tok = self.peek()
        if tok == "(":
            self.take()
            f = self.disj()
            if self.peek() != ")":
                self.error("expected ')'")
            self.take()
            return f
        if tok == "true":
            self.take()
            return TRUE
        if tok == "false":
            self.take()
            return FALSE
        if tok == "<eof>" or tok in _KEYWORDS or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.]*", tok):
            self.error("expected formula")
        return Atom(self.take()[0])


def parse_ltl(text: str) -> LtlFormula:
    """Parse LTL concrete syntax into a formula tree."""
    return _Parser(text).parse()


def sequential_visit(goals: Sequence[str]) -> LtlFormula:
    """Visit ``goals`` in order, each strictly after the previous one."""
    if not goals:
        raise InputError("sequential visit needs at least one goal")
    f = Eventually(Atom(goals[-1]))
    for g in reversed(goals[:-1]):
        f = Eventually(And(Atom(g), Next(f)))
    return f


# ---------------------------------------------------------------- NNF

def to_nnf(f: LtlFormula) -> LtlFormula:
    """Push negations down to atoms, preserving finite-trace semantics."""
    return _nnf(f, False)


def _nnf(f, neg):
    if isinstance(f, TrueF):
        return FALSE if neg else TRUE
    if isinstance(f, FalseF):
        return TRUE if neg else FALSE
    if isinstance(f, Atom):
        return Not(f) if neg else f
    if isinstance(f, Not):
        return _nnf(f.arg, not neg)
    if isinstance(f, And):
        l, r = _nnf(f.left, neg), _nnf(f.right, neg)
        return Or(l, r) if neg else And(l, r)
    if isinstance(f, Or):
        l, r = _nnf(f.left, neg), _nnf(f.right, neg)
        return And(l, r) if neg else Or(l, r)
    if isinstance(f, Next):
        return WeakNext(_nnf(f.arg, True)) if neg else Next(_nnf(f.arg, False))
    if isinstance(f, WeakNext):
        return Next(_nnf(f.arg, True)) if neg else WeakNext(_nnf(f.arg, False))
    if isinstance(f, Eventually):
        return Always(_nnf(f.arg, True)) if neg else Eventually(_nnf(f.arg, False))
    if isinstance(f, Always):
        return Eventually(_nnf(f.arg, True)) if neg else Always(_nnf(f.arg, False))
    if isinstance(f, Until):
        if not neg:
            return Until(_nnf(f.left, False), _nnf(f.right, False))
        # !(a U b)  ==  (!b U (!a & !b)) | G !b   on finite traces
        na, nb = _nnf(f.left, True), _nnf(f.right, True)
        return Or(Until(nb, And(na, nb)), Always(nb))
    raise TypeError(f"not an LTL formula: {f!r}")


def is_nnf(f: LtlFormula) -> bool:
    if isinstance(f, Not):
        return isinstance(f.arg, Atom)
    return all(is_nnf(c) for c in _children(f))


def _children(f):
    if isinstance(f, (And, Or, Until)):
        return (f.left, f.right)
    if isinstance(f, (Not, Next, WeakNext, Eventually, Always)):
        return (f.arg,)
    return ()


def atoms(f: LtlFormula) -> list[str]:
    """Atomic propositions in order of first appearance."""
    seen: dict[str, None] = {}

    def walk(g):
        if isinstance(g, Atom):
            seen.setdefault(g.name)
        for c in _children(g):
            walk(c)

    walk(f)
    return list(seen)


# ---------------------------------------------------------------- finite-trace semantics

def eval_finite_trace(f: LtlFormula, trace: Sequence[Iterable[str]]) -> bool:
    """Truth of ``f`` at position 0 of a nonempty finite trace of label sets."""
    if len(trace) == 0:
        raise InputError("empty trace")
    trace = [frozenset(s) for s in trace]
    return _truth(f, trace)[0]


def _truth(f, trace):
    n = len(trace)
    if isinstance(f, TrueF):
        return [True] * n
    if isinstance(f, FalseF):
        return [False] * n
    if isinstance(f, Atom):
        return [f.name in s for s in trace]
    if isinstance(f, Not):
        return [not v for v in _truth(f.arg, trace)]
    if isinstance(f, And):
        return [a and b for a, b in zip(_truth(f.left, trace), _truth(f.right, trace))]
    if isinstance(f, Or):
        return [a or b for a, b in zip(_truth(f.left, trace), _truth(f.right, trace))]
    if isinstance(f, Next):
        a = _truth(f.arg, trace)
        return [t + 1 < n and a[t + 1] for t in range(n)]
    if isinstance(f, WeakNext):
        a = _truth(f.arg, trace)
        return [t + 1 >= n or a[t + 1] for t in range(n)]
    if isinstance(f, Until):
        a, b = _truth(f.left, trace), _truth(f.right, trace)
        out = [False] * n
        nxt = False
        for t in range(n - 1, -1, -1):
            nxt = b[t] or (a[t] and nxt)
            out[t] = nxt
        return out
    if isinstance(f, Eventually):
        a = _truth(f.arg, trace)
        out, acc = [False] * n, False
        for t in range(n - 1, -1, -1):
            acc = acc or a[t]
            out[t] = acc
        return out
    if isinstance(f, Always):
        a = _truth(f.arg, trace)
        out, acc = [False] * n, True
        for t in range(n - 1, -1, -1):
            acc = acc and a[t]
            out[t] = acc
        return out
    raise TypeError(f"not an LTL formula: {f!r}")


# ---------------------------------------------------------------- co-safe DFA

@dataclass(frozen=True)
class FiniteAutomaton:
    """Complete DFA over subsets of ``atoms``.

    States are integers ``0..n-1``; ``residuals[q]`` is the formula still to be
    satisfied by the remainder of the trace when in state ``q``.
    """

    atoms: tuple[str, ...]
    residuals: tuple[LtlFormula, ...]
    initial: int
    accepting: frozenset[int]
    transitions: dict

    @property
    def states(self) -> range:
        return range(len(self.residuals))

    @property
    def alphabet(self) -> list[frozenset[str]]:
        return [frozenset(c) for r in range(len(self.atoms) + 1)
                for c in itertools.combinations(self.atoms, r)]

    def step(self, state: int, labels: Iterable[str]) -> int:
        return self.transitions[(state, frozenset(labels) & frozenset(self.atoms))]

    def run(self, trace: Sequence[Iterable[str]]) -> int:
        q = self.initial
        for s in trace:
            q = self.step(q, s)
        return q

    def accepts(self, trace: Sequence[Iterable[str]]) -> bool:
        return self.run(trace) in self.accepting


# Residual formulas are kept in a canonical form so that equal obligations
# become the same DFA state: And/Or are flattened into sorted, deduplicated
# n-ary nodes encoded as ("and", items) / ("or", items) tuples.

def _key(f):
    return str(f)


def _mk_and(items):
    flat = []
    for it in items:
        if isinstance(it, FalseF):
            return FALSE
        if isinstance(it, TrueF):
            continue
        if isinstance(it, _NAnd):
            flat.extend(it.items)
        else:
            flat.append(it)
    uniq = sorted({_key(x): x for x in flat}.items())
    if not uniq:
        return TRUE
    if len(uniq) == 1:
        return uniq[0][1]
    return _NAnd(tuple(x for _, x in uniq))


def _mk_or(items):
    flat = []
    for it in items:
        if isinstance(it, TrueF):
            return TRUE
        if isinstance(it, FalseF):
            continue
        if isinstance(it, _NOr):
            flat.extend(it.items)
        else:
            flat.append(it)
    uniq = sorted({_key(x): x for x in flat}.items())
    if not uniq:
        return FALSE
    if len(uniq) == 1:
        return uniq[0][1]
    return _NOr(tuple(x for _, x in uniq))


@dataclass(frozen=True)
class _NAnd:
    items: tuple

    def __str__(self):
        return "(" + " & ".join(map(str, self.items)) + ")"


@dataclass(frozen=True)
class _NOr:
    items: tuple

    def __str__(self):
        return "(" + " | ".join(map(str, self.items)) + ")"


_NONEMPTY = Eventually(TRUE)


def _nullable(r) -> bool:
    """Whether residual ``r`` is met by the empty remainder (trace ended)."""
    if isinstance(r, TrueF):
        return True
    if isinstance(r, _NAnd):
        return all(_nullable(x) for x in r.items)
    if isinstance(r, _NOr):
        return any(_nullable(x) for x in r.items)
    return False


def _progress(f, sigma):
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, Atom):
        return TRUE if f.name in sigma else FALSE
    if isinstance(f, Not):
        return FALSE if f.arg.name in sigma else TRUE
    if isinstance(f, (And, _NAnd)):
        items = (f.left, f.right) if isinstance(f, And) else f.items
        return _mk_and([_progress(x, sigma) for x in items])
    if isinstance(f, (Or, _NOr)):
        items = (f.left, f.right) if isinstance(f, Or) else f.items
        return _mk_or([_progress(x, sigma) for x in items])
    if isinstance(f, Next):
        inner = _canon(f.arg)
        # Strong next: the remainder must be nonempty.
        return _mk_and([inner, _NONEMPTY]) if _nullable(inner) else inner
    if isinstance(f, Eventually):
        return _mk_or([_progress(f.arg, sigma), f])
    if isinstance(f, Until):
        return _mk_or([_progress(f.right, sigma), _mk_and([_progress(f.left, sigma), f])])
    raise UnsupportedFragment(f"unsupported operator in co-safe fragment: {f}", f)


def _canon(f):
    if isinstance(f, And):
        return _mk_and([_canon(f.left), _canon(f.right)])
    if isinstance(f, Or):
        return _mk_or([_canon(f.left), _canon(f.right)])
    return f


def _check_cosafe(f):
    if isinstance(f, (Always, WeakNext)):
        raise UnsupportedFragment(
            f"subformula {f} is outside the supported co-safe fragment", f
        )
    if isinstance(f, Not) and not isinstance(f.arg, Atom):
        raise UnsupportedFragment(f"formula not in negation normal form at {f}", f)
    for c in _children(f):
        _check_cosafe(c)


def compile_to_dfa(f: LtlFormula) -> FiniteAutomaton:
    """Build a DFA accepting exactly the finite traces that satisfy ``f``.

    ``f`` must be in NNF and free of ``G`` and weak next. States are residual
    formulas obtained by progression; state 0 is the initial state and the
    remaining states are numbered in breadth-first discovery order.
    """
    _check_cosafe(f)
    props = tuple(atoms(f))
    alphabet = [frozenset(c) for r in range(len(props) + 1)
                for c in itertools.combinations(props, r)]
    init = _canon(f)
    index = {_key(init): 0}
    residuals = [init]
    transitions = {}
    queue = deque([0])
    while queue:
        q = queue.popleft()
        for sigma in alphabet:
            nxt = _progress(residuals[q], sigma)
            k = _key(nxt)
            if k not in index:
                index[k] = len(residuals)
                residuals.append(nxt)
                queue.append(index[k])
            transitions[(q, sigma)] = index[k]
    accepting = frozenset(q for q, r in enumerate(residuals) if _nullable(r))
    return FiniteAutomaton(props, tuple(residuals), 0, accepting, transitions)


# ---------------------------------------------------------------- spec splitting

def conjuncts(f: LtlFormula) -> list[LtlFormula]:
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    return [f]


def _avoid_literals(g):
    """Atoms named by an ``!a & !b ...`` body, or None if ``g`` has another shape."""
    if isinstance(g, Not) and isinstance(g.arg, Atom):
        return [g.arg.name]
    if isinstance(g, And):
        l, r = _avoid_literals(g.left), _avoid_literals(g.right)
        if l is not None and r is not None:
            return l + r
    return None


def split_spec(f: LtlFormula) -> tuple[LtlFormula, frozenset[str]]:
    """Separate top-level ``G(!a & !b ...)`` conjuncts from the reachability part.

    Returns the NNF reachability formula and the set of atoms to avoid.
    """
    f = to_nnf(f)
    avoid: set[str] = set()
    rest = []
    for c in conjuncts(f):
        lits = _avoid_literals(c.arg) if isinstance(c, Always) else None
        if lits is not None:
            avoid.update(lits)
        else:
            rest.append(c)
    reach = TRUE
    for c in rest:
        reach = c if reach is TRUE else And(reach, c)
    return reach, frozenset(avoid)


def goal_sequence(f: LtlFormula) -> list[str]:
    """Positive atoms of the reachability part, in order of appearance."""
    reach, avoid = split_spec(f)
    out: list[str] = []

    def walk(g):
        if isinstance(g, Not):
            return
        if isinstance(g, Atom) and g.name not in avoid and g.name not in out:
            out.append(g.name)
        for c in _children(g):
            walk(c)

    walk(reach)
    return out
