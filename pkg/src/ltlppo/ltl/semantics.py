"""Exact LTL semantics on ultimately periodic (lasso) words.

A lasso ``prefix . loop^omega`` has ``n = len(prefix) + len(loop)`` distinct
positions; the successor of the last position jumps back to the loop start.
Temporal operators are evaluated as fixpoints over that finite graph, for many
lassos of the same shape at once.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple

import numpy as np

from .formula import (
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
)

Letter = FrozenSet[str]


def letter(*names: str) -> Letter:
    return frozenset(names)


@dataclass(frozen=True)
class LassoWord:
    prefix: Tuple[Letter, ...]
    loop: Tuple[Letter, ...]

    def __post_init__(self):
        if len(self.loop) < 1:
            raise ValueError("lasso loop must be nonempty")
        object.__setattr__(self, "prefix", tuple(frozenset(a) for a in self.prefix))
        object.__setattr__(self, "loop", tuple(frozenset(a) for a in self.loop))

    def __len__(self) -> int:
        return len(self.prefix) + len(self.loop)

    def letters(self) -> Tuple[Letter, ...]:
        return self.prefix + self.loop

    def successor(self) -> np.ndarray:
        return lasso_successor(len(self.prefix), len(self.loop))

    def shift(self) -> "LassoWord":
        """The suffix starting at position 1."""
        if self.prefix:
            return LassoWord(self.prefix[1:], self.loop)
        return LassoWord((), self.loop[1:] + self.loop[:1])

    def prepend(self, a: Iterable[str]) -> "LassoWord":
        return LassoWord((frozenset(a),) + self.prefix, self.loop)

    def unroll(self, length: int) -> List[Letter]:
        out = list(self.prefix)
        i = 0
        while len(out) < length:
            out.append(self.loop[i % len(self.loop)])
            i += 1
        return out[:length]


def lasso_successor(prefix_len: int, loop_len: int) -> np.ndarray:
    n = prefix_len + loop_len
    succ = np.arange(1, n + 1)
    succ[-1] = prefix_len
    return succ


def evaluate_positions(f: Formula, masks: np.ndarray, succ: np.ndarray, index: Dict[str, int]) -> np.ndarray:
    """Truth of ``f`` at every position of a batch of same-shape lassos.

    ``masks`` has shape (N, n): letter bitmasks over ``index``. Returns a bool
    array of the same shape.
    """
    memo: Dict[Formula, np.ndarray] = {}
    n = masks.shape[1]

    def ev(g: Formula) -> np.ndarray:
        hit = memo.get(g)
        if hit is not None:
            return hit
        if isinstance(g, TrueF):
            out = np.ones(masks.shape, dtype=bool)
        elif isinstance(g, FalseF):
            out = np.zeros(masks.shape, dtype=bool)
        elif isinstance(g, Atom):
            bit = index.get(g.name)
            if bit is None:
                out = np.zeros(masks.shape, dtype=bool)
            else:
                out = (masks >> bit) & 1 == 1
        elif isinstance(g, Not):
            out = ~ev(g.child)
        elif isinstance(g, And):
            out = ev(g.left) & ev(g.right)
        elif isinstance(g, Or):
            out = ev(g.left) | ev(g.right)
        elif isinstance(g, Next):
            out = ev(g.child)[:, succ]
        elif isinstance(g, (Until, Eventually)):
            hold = ev(g.left) if isinstance(g, Until) else np.ones(masks.shape, dtype=bool)
            goal = ev(g.right if isinstance(g, Until) else g.child)
            out = goal.copy()
            # least fixpoint: Z = goal | (hold & Z[succ])
            for _ in range(n):
                nxt = goal | (hold & out[:, succ])
                if np.array_equal(nxt, out):
                    break
                out = nxt
        elif isinstance(g, (Release, Always)):
            release = ev(g.left) if isinstance(g, Release) else np.zeros(masks.shape, dtype=bool)
            keep = ev(g.right if isinstance(g, Release) else g.child)
            out = keep.copy()
            # greatest fixpoint: Z = keep & (release | Z[succ])
            for _ in range(n):
                nxt = keep & (release | out[:, succ])
                if np.array_equal(nxt, out):
                    break
                out = nxt
        else:
            raise TypeError(f"unknown node {g!r}")
        memo[g] = out
        return out

    return ev(f)


def encode_letters(letters: Sequence[Iterable[str]], index: Dict[str, int]) -> np.ndarray:
    out = np.zeros(len(letters), dtype=np.int64)
    for i, a in enumerate(letters):
        m = 0
        for name in a:
            bit = index.get(name)
            if bit is not None:
                m |= 1 << bit
        out[i] = m
    return out


def holds_on_lasso(f: Formula, w: LassoWord) -> bool:
    """Whether the infinite word ``w`` satisfies ``f`` at position 0."""
    names = sorted(f.atoms())
    index = {p: i for i, p in enumerate(names)}
    masks = encode_letters(w.letters(), index)[None, :]
    return bool(evaluate_positions(f, masks, w.successor(), index)[0, 0])


class LassoFamily:
    """All lassos over ``alphabet`` with bounded prefix/loop length, grouped by shape.

    Each shape (p, l) holds an (N, p + l) array of letter bitmasks, enumerated
    in lexicographic order.
    """

    def __init__(self, alphabet: Sequence[str], max_prefix: int, max_loop: int, min_loop: int = 1):
        self.alphabet = tuple(alphabet)
        self.index = {p: i for i, p in enumerate(self.alphabet)}
        n_letters = 1 << len(self.alphabet)
        self.shapes: Dict[Tuple[int, int], np.ndarray] = {}
        for p in range(max_prefix + 1):
            for l in range(min_loop, max_loop + 1):
                rows = list(itertools.product(range(n_letters), repeat=p + l))
                self.shapes[(p, l)] = np.array(rows, dtype=np.int64).reshape(len(rows), p + l)

    def __len__(self) -> int:
        return sum(len(v) for v in self.shapes.values())

    def decode(self, mask: int) -> Letter:
        return frozenset(p for p, i in self.index.items() if (mask >> i) & 1)

    def words(self):
        for (p, l), arr in self.shapes.items():
            for row in arr:
                letters = [self.decode(int(m)) for m in row]
                yield LassoWord(tuple(letters[:p]), tuple(letters[p:]))

    def evaluate(self, f: Formula) -> Dict[Tuple[int, int], np.ndarray]:
        """Truth of ``f`` at position 0 of every lasso, keyed by shape."""
        out = {}
        for (p, l), arr in self.shapes.items():
            out[(p, l)] = evaluate_positions(f, arr, lasso_successor(p, l), self.index)[:, 0]
        return out

    def evaluate_prepended(self, f: Formula, mask: int) -> Dict[Tuple[int, int], np.ndarray]:
        """Truth of ``f`` on ``a . w`` for every lasso ``w``, with ``a`` given as a bitmask."""
        out = {}
        for (p, l), arr in self.shapes.items():
            ext = np.concatenate([np.full((arr.shape[0], 1), mask, dtype=np.int64), arr], axis=1)
            out[(p, l)] = evaluate_positions(f, ext, lasso_successor(p + 1, l), self.index)[:, 0]
        return out
