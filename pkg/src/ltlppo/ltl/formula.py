"""LTL abstract syntax, canonical printing, NNF and Boolean simplification."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Tuple

MAX_ALPHABET = 16


class Formula:
    """Base class of all LTL nodes. Nodes are immutable and compare structurally."""

    arity = 0

    def children(self) -> Tuple["Formula", ...]:
        return ()

    @cached_property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children())

    @cached_property
    def text(self) -> str:
        return _print(self, 0)

    @cached_property
    def sort_key(self) -> Tuple[int, str]:
        return (self.size, self.text)

    def __str__(self) -> str:
        return self.text

    def atoms(self) -> frozenset:
        out = set()
        for node in self.walk():
            if isinstance(node, Atom):
                out.add(node.name)
        return frozenset(out)

    def walk(self) -> Iterator["Formula"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children()))

    @property
    def is_propositional(self) -> bool:
        return all(isinstance(n, (TrueF, FalseF, Atom, Not, And, Or)) for n in self.walk())

    @property
    def is_nnf(self) -> bool:
        for n in self.walk():
            if isinstance(n, Not) and not isinstance(n.child, Atom):
                return False
            if isinstance(n, (Always, Eventually)):
                return False
        return True


@dataclass(frozen=True, eq=True)
class TrueF(Formula):
    def __repr__(self) -> str:
        return "TrueF()"


@dataclass(frozen=True, eq=True)
class FalseF(Formula):
    def __repr__(self) -> str:
        return "FalseF()"


@dataclass(frozen=True, eq=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True, eq=True)
class _Unary(Formula):
    child: Formula
    arity = 1

    def children(self):
        return (self.child,)


@dataclass(frozen=True, eq=True)
class _Binary(Formula):
    left: Formula
    right: Formula
    arity = 2

    def children(self):
        return (self.left, self.right)


class Not(_Unary):
    pass


class Next(_Unary):
    pass


class Always(_Unary):
    pass


class Eventually(_Unary):
    pass


class And(_Binary):
    pass


class Or(_Binary):
    pass


class Until(_Binary):
    pass


class Release(_Binary):
    pass


TRUE = TrueF()
FALSE = FalseF()

# precedence levels used by the printer; the parser mirrors them
_PREC = {Or: 1, And: 2, Until: 3, Release: 3}
_BIN_SYM = {And: "&", Or: "|", Until: "U", Release: "R"}
_UN_SYM = {Not: "!", Next: "X", Always: "G", Eventually: "F"}


def _print(f: Formula, ctx: int) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, _Unary):
        sym = _UN_SYM[type(f)]
        inner = _print(f.child, 4)
        return f"{sym}{inner}" if sym == "!" else f"{sym} {inner}"
    prec = _PREC[type(f)]
    sym = _BIN_SYM[type(f)]
    if isinstance(f, (Until, Release)):
        # right associative
        s = f"{_print(f.left, prec + 1)} {sym} {_print(f.right, prec)}"
    else:
        # left associative
        s = f"{_print(f.left, prec)} {sym} {_print(f.right, prec + 1)}"
    return f"({s})" if prec < ctx else s


def is_literal(f: Formula) -> bool:
    return isinstance(f, (Atom, TrueF, FalseF)) or (isinstance(f, Not) and isinstance(f.child, Atom))


# ---------------------------------------------------------------------------
# negation normal form


def to_nnf(f: Formula) -> Formula:
    """Push negations down to atoms; G becomes false R _, F becomes true U _."""
    if isinstance(f, (TrueF, FalseF, Atom)):
        return f
    if isinstance(f, Not):
        return _neg_nnf(f.child)
    if isinstance(f, Always):
        return Release(FALSE, to_nnf(f.child))
    if isinstance(f, Eventually):
        return Until(TRUE, to_nnf(f.child))
    if isinstance(f, Next):
        return Next(to_nnf(f.child))
    return type(f)(to_nnf(f.left), to_nnf(f.right))


def _neg_nnf(f: Formula) -> Formula:
    if isinstance(f, TrueF):
        return FALSE
    if isinstance(f, FalseF):
        return TRUE
    if isinstance(f, Atom):
        return Not(f)
    if isinstance(f, Not):
        return to_nnf(f.child)
    if isinstance(f, And):
        return Or(_neg_nnf(f.left), _neg_nnf(f.right))
    if isinstance(f, Or):
        return And(_neg_nnf(f.left), _neg_nnf(f.right))
    if isinstance(f, Next):
        return Next(_neg_nnf(f.child))
    if isinstance(f, Until):
        return Release(_neg_nnf(f.left), _neg_nnf(f.right))
    if isinstance(f, Release):
        return Until(_neg_nnf(f.left), _neg_nnf(f.right))
    if isinstance(f, Always):
        return Until(TRUE, _neg_nnf(f.child))
    if isinstance(f, Eventually):
        return Release(FALSE, _neg_nnf(f.child))
    raise TypeError(f"unknown node {f!r}")


def negate(f: Formula) -> Formula:
    """NNF of the negation of ``f``."""
    return _neg_nnf(f)


# ---------------------------------------------------------------------------
# simplifying constructors (used by progression)


def _flatten(f: Formula, kind) -> Iterator[Formula]:
    if isinstance(f, kind):
        yield from _flatten(f.left, kind)
        yield from _flatten(f.right, kind)
    else:
        yield f


def _complement(f: Formula) -> Formula | None:
    if isinstance(f, Atom):
        return Not(f)
    if isinstance(f, Not) and isinstance(f.child, Atom):
        return f.child
    return None


def _build(kind, items: Iterable[Formula], unit: Formula, zero: Formula) -> Formula:
    other = Or if kind is And else And
    seen = {}
    for it in items:
        for part in _flatten(it, kind):
            if part == zero:
                return zero
            if part == unit:
                continue
            seen[part] = None
    parts = list(seen)
    present = set(parts)
    for p in parts:
        c = _complement(p)
        if c is not None and c in present:
            return zero
    # absorption: a & (a | b) = a, a | (a & b) = a
    kept = []
    for p in parts:
        if isinstance(p, other):
            inner = set(_flatten(p, other))
            if any(q in inner for q in present if q is not p):
                continue
        kept.append(p)
    if not kept:
        return unit
    kept.sort(key=lambda x: x.sort_key)
    out = kept[0]
    for p in kept[1:]:
        out = kind(out, p)
    return out


def mk_and(*items: Formula) -> Formula:
    return _build(And, items, TRUE, FALSE)


def mk_or(*items: Formula) -> Formula:
    return _build(Or, items, FALSE, TRUE)


def mk_not(f: Formula) -> Formula:
    if isinstance(f, Not):
        return f.child
    if isinstance(f, TrueF):
        return FALSE
    if isinstance(f, FalseF):
        return TRUE
    return Not(f)


def simplify(f: Formula) -> Formula:
    """Bottom-up Boolean simplification; temporal operators get unit laws only."""
    if isinstance(f, (TrueF, FalseF, Atom)):
        return f
    if isinstance(f, Not):
        return mk_not(simplify(f.child))
    if isinstance(f, And):
        return mk_and(simplify(f.left), simplify(f.right))
    if isinstance(f, Or):
        return mk_or(simplify(f.left), simplify(f.right))
    if isinstance(f, Next):
        c = simplify(f.child)
        return c if isinstance(c, (TrueF, FalseF)) else Next(c)
    if isinstance(f, Always):
        c = simplify(f.child)
        return c if isinstance(c, (TrueF, FalseF)) else Always(c)
    if isinstance(f, Eventually):
        c = simplify(f.child)
        return c if isinstance(c, (TrueF, FalseF)) else Eventually(c)
    a, b = simplify(f.left), simplify(f.right)
    if isinstance(f, Until):
        if isinstance(b, (TrueF, FalseF)):
            return b
        if isinstance(a, FalseF):
            return b
        return Until(a, b)
    if isinstance(b, (TrueF, FalseF)):
        return b
    if isinstance(a, TrueF):
        return b
    return Release(a, b)


# ---------------------------------------------------------------------------
# closure


def subformulas(f: Formula) -> Tuple[Formula, ...]:
    """Syntactic closure of ``f`` ordered by (size, printed form), largest first.

    The negated atom ``!b`` contributes both ``!b`` and ``b``.
    """
    nodes = {n: None for n in f.walk()}
    return tuple(sorted(nodes, key=lambda n: (-n.size, n.text)))


def eval_prop(f: Formula, letter) -> bool:
    """Evaluate a propositional formula on a letter (a set of true atom names)."""
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, Atom):
        return f.name in letter
    if isinstance(f, Not):
        return not eval_prop(f.child, letter)
    if isinstance(f, And):
        return eval_prop(f.left, letter) and eval_prop(f.right, letter)
    if isinstance(f, Or):
        return eval_prop(f.left, letter) or eval_prop(f.right, letter)
    raise ValueError(f"not propositional: {f}")
