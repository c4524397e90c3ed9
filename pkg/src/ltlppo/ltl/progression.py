"""Formula progression: rewrite an obligation against one observed letter."""
from __future__ import annotations

from typing import Iterable

from .formula import (
    FALSE,
    TRUE,
    Always,
    And,
    Atom,
    Eventually,
    FalseF,
    Formula,
    Next,
    Not,
    Or,
    Release,
    TrueF,
    Until,
    mk_and,
    mk_or,
    to_nnf,
)


def progress(f: Formula, a: Iterable[str]) -> Formula:
    """Obligation on the suffix after reading letter ``a``.

    For every infinite word ``a.w``: ``a.w |= f`` iff ``w |= progress(f, a)``.
    The result is simplified, so an unavoidable violation shows up as ``false``.
    """
    letter = a if isinstance(a, (set, frozenset)) else frozenset(a)
    return _prog(f, letter)


def _prog(f: Formula, a) -> Formula:
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, Atom):
        return TRUE if f.name in a else FALSE
    if isinstance(f, Not):
        if isinstance(f.child, Atom):
            return FALSE if f.child.name in a else TRUE
        return _prog(to_nnf(f), a)
    if isinstance(f, And):
        left = _prog(f.left, a)
        if isinstance(left, FalseF):
            return FALSE
        return mk_and(left, _prog(f.right, a))
    if isinstance(f, Or):
        left = _prog(f.left, a)
        if isinstance(left, TrueF):
            return TRUE
        return mk_or(left, _prog(f.right, a))
    if isinstance(f, Next):
        return f.child
    if isinstance(f, Until):
        return mk_or(_prog(f.right, a), mk_and(_prog(f.left, a), f))
    if isinstance(f, Release):
        return mk_and(_prog(f.right, a), mk_or(_prog(f.left, a), f))
    if isinstance(f, Always):
        return mk_and(_prog(f.child, a), f)
    if isinstance(f, Eventually):
        return mk_or(_prog(f.child, a), f)
    raise TypeError(f"unknown node {f!r}")


def progress_trace(f: Formula, letters) -> Formula:
    for a in letters:
        f = progress(f, a)
        if isinstance(f, FalseF):
            break
    return f
