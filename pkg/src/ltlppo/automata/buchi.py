"""LTL to nondeterministic Buchi automata via an on-the-fly tableau.

The construction expands obligations into tableau nodes (Gerth, Peled, Vardi,
Wolper), reads the result as a generalized Buchi automaton with one acceptance
set per Until subformula, and degeneralizes it with a level counter. A cheap
bisimulation-style merge removes states with identical outgoing behaviour.
This automaton is a verification aid; runtime monitoring uses
:mod:`ltlppo.automata.monitor`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from ..ltl.formula import (
    FALSE,
    TRUE,
    And,
    Atom,
    FalseF,
    Formula,
    Next,
    Not,
    Or,
    Release,
    TrueF,
    Until,
    is_literal,
    mk_and,
    to_nnf,
)
from ..ltl.semantics import LassoWord, encode_letters

DEFAULT_STATE_BOUND = 100_000
_INIT = -1


class CapacityExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Edge:
    src: int
    label: Formula
    dst: int
    pos: int  # bitmask of atoms that must be true
    neg: int  # bitmask of atoms that must be false

    def enabled(self, mask: int) -> bool:
        return (mask & self.pos) == self.pos and (mask & self.neg) == 0


@dataclass(frozen=True)
class BuchiAutomaton:
    n_states: int
    alphabet: Tuple[str, ...]
    initial: int
    edges: Tuple[Edge, ...]
    accepting: FrozenSet[int]
    names: Tuple[str, ...] = ()
    out: Tuple[Tuple[Edge, ...], ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        buckets: List[List[Edge]] = [[] for _ in range(self.n_states)]
        for e in self.edges:
            buckets[e.src].append(e)
        object.__setattr__(self, "out", tuple(tuple(b) for b in buckets))

    @property
    def transitions(self) -> List[Tuple[int, Formula, int]]:
        return [(e.src, e.label, e.dst) for e in self.edges]

    def successors(self, states: Iterable[int], mask: int) -> FrozenSet[int]:
        return frozenset(e.dst for q in states for e in self.out[q] if e.enabled(mask))


# ---------------------------------------------------------------------------
# tableau


def _complement(lit: Formula) -> Formula:
    if isinstance(lit, Atom):
        return Not(lit)
    if isinstance(lit, Not):
        return lit.child
    if isinstance(lit, TrueF):
        return FALSE
    return TRUE


def _tableau(f: Formula, bound: int):
    nodes: List[dict] = []
    index: Dict[Tuple[frozenset, frozenset], int] = {}
    stack = [(frozenset({_INIT}), frozenset({f}), frozenset(), frozenset())]
    while stack:
        incoming, new, old, nxt = stack.pop()
        if not new:
            key = (old, nxt)
            hit = index.get(key)
            if hit is not None:
                nodes[hit]["incoming"] |= incoming
                continue
            if len(nodes) >= bound:
                raise CapacityExceeded(f"tableau exceeds {bound} nodes")
            nid = len(nodes)
            index[key] = nid
            nodes.append({"incoming": set(incoming), "old": old, "next": nxt})
            stack.append((frozenset({nid}), nxt, frozenset(), frozenset()))
            continue
        eta = min(new, key=lambda g: g.sort_key)
        new = new - {eta}
        if is_literal(eta):
            if isinstance(eta, FalseF) or _complement(eta) in old:
                continue
            stack.append((incoming, new, old | {eta}, nxt))
        elif isinstance(eta, And):
            stack.append((incoming, new | ({eta.left, eta.right} - old), old | {eta}, nxt))
        elif isinstance(eta, Next):
            stack.append((incoming, new, old | {eta}, nxt | {eta.child}))
        elif isinstance(eta, Or):
            stack.append((incoming, new | ({eta.right} - old), old | {eta}, nxt))
            stack.append((incoming, new | ({eta.left} - old), old | {eta}, nxt))
        elif isinstance(eta, Until):
            stack.append((incoming, new | ({eta.right} - old), old | {eta}, nxt))
            stack.append((incoming, new | ({eta.left} - old), old | {eta}, nxt | {eta}))
        elif isinstance(eta, Release):
            stack.append((incoming, new | ({eta.left, eta.right} - old), old | {eta}, nxt))
            stack.append((incoming, new | ({eta.right} - old), old | {eta}, nxt | {eta}))
        else:
            raise TypeError(f"formula not in NNF: {eta}")
    return nodes


def _label(old: Iterable[Formula], index: Dict[str, int]) -> Tuple[Formula, int, int]:
    lits = sorted((g for g in old if isinstance(g, (Atom, Not)) and is_literal(g)), key=lambda g: g.sort_key)
    pos = neg = 0
    for g in lits:
        if isinstance(g, Atom):
            pos |= 1 << index[g.name]
        else:
            neg |= 1 << index[g.child.name]
    return mk_and(*lits) if lits else TRUE, pos, neg


def ltl_to_nba(f: Formula, alphabet: Optional[Sequence[str]] = None, bound: int = DEFAULT_STATE_BOUND) -> BuchiAutomaton:
    """Compile ``f`` into a state-reduced nondeterministic Buchi automaton."""
    f = to_nnf(f)
    names = tuple(sorted(f.atoms())) if alphabet is None else tuple(alphabet)
    missing = f.atoms() - set(names)
    if missing:
        raise ValueError(f"atoms {sorted(missing)} not in alphabet")
    index = {p: i for i, p in enumerate(names)}
    nodes = _tableau(f, bound)

    untils = sorted({g for g in f.walk() if isinstance(g, Until)}, key=lambda g: g.sort_key)
    acc_sets = [
        {i for i, nd in enumerate(nodes) if u not in nd["old"] or u.right in nd["old"] or isinstance(u.right, TrueF)}
        for u in untils
    ]
    k = len(acc_sets)
    levels = max(k, 1)

    # node ids 0..N-1, pseudo-initial state N
    n_nodes = len(nodes)
    init = n_nodes
    labels = [_label(nd["old"], index) for nd in nodes]
    raw_edges = []  # (src, dst) on tableau nodes, label = label of dst
    for j, nd in enumerate(nodes):
        for src in nd["incoming"]:
            raw_edges.append((init if src == _INIT else src, j))

    def in_acc(q: int, level: int) -> bool:
        return q != init and q in acc_sets[level]

    # degeneralize: state (q, level)
    state_id: Dict[Tuple[int, int], int] = {}
    order: List[Tuple[int, int]] = []
    succ_of: Dict[int, List[int]] = {}
    for s, d in raw_edges:
        succ_of.setdefault(s, []).append(d)

    def sid(key):
        if key not in state_id:
            if len(state_id) >= bound:
                raise CapacityExceeded(f"automaton exceeds {bound} states")
            state_id[key] = len(order)
            order.append(key)
        return state_id[key]

    start = sid((init, 0))
    edges = []
    frontier = [(init, 0)]
    seen = {(init, 0)}
    while frontier:
        q, lvl = frontier.pop()
        nxt_lvl = (lvl + 1) % levels if (k > 0 and in_acc(q, lvl)) else lvl
        for d in sorted(set(succ_of.get(q, ()))):
            key = (d, nxt_lvl)
            edges.append((sid((q, lvl)), labels[d], sid(key)))
            if key not in seen:
                seen.add(key)
                frontier.append(key)
    if k == 0:
        accepting = set(range(len(order)))
    else:
        accepting = {i for i, (q, lvl) in enumerate(order) if lvl == 0 and in_acc(q, 0)}

    return _reduce(len(order), start, edges, accepting, names)


def _reduce(n: int, initial: int, edges, accepting, names) -> BuchiAutomaton:
    """Merge states with equal acceptance and equal outgoing edges, then prune."""
    rep = list(range(n))
    while True:
        groups: Dict[tuple, int] = {}
        changed = False
        outs: Dict[int, set] = {rep[q]: set() for q in range(n)}
        for s, (lab, pos, neg), d in edges:
            outs[rep[s]].add((pos, neg, rep[d]))
        new_rep = {}
        for q in sorted(outs):
            sig = (q in accepting, frozenset(outs[q]))
            if sig in groups:
                new_rep[q] = groups[sig]
                changed = True
            else:
                groups[sig] = q
                new_rep[q] = q
        rep = [new_rep[rep[q]] for q in range(n)]
        accepting = {rep[q] for q in accepting}
        if not changed:
            break
    root = rep[initial]
    adj: Dict[int, set] = {}
    uniq = {}
    for s, (lab, pos, neg), d in edges:
        key = (rep[s], pos, neg, rep[d])
        if key not in uniq:
            uniq[key] = lab
            adj.setdefault(rep[s], set()).add(rep[d])
    # reachable states, BFS order gives stable numbering
    order = [root]
    seen = {root}
    i = 0
    while i < len(order):
        q = order[i]
        i += 1
        for d in sorted(adj.get(q, ())):
            if d not in seen:
                seen.add(d)
                order.append(d)
    renum = {q: j for j, q in enumerate(order)}
    out_edges = sorted(
        (Edge(renum[s], lab, renum[d], pos, neg) for (s, pos, neg, d), lab in uniq.items() if s in renum),
        key=lambda e: (e.src, e.dst, e.pos, e.neg),
    )
    acc = frozenset(renum[q] for q in accepting if q in renum)
    return BuchiAutomaton(len(order), tuple(names), 0, tuple(out_edges), acc, tuple(f"q{j}" for j in range(len(order))))


# ---------------------------------------------------------------------------
# lasso acceptance


def _reach_after(A: BuchiAutomaton, prefix: Sequence[int]) -> FrozenSet[int]:
    current = frozenset({A.initial})
    for m in prefix:
        current = A.successors(current, m)
        if not current:
            break
    return current


def _loop_winning(A: BuchiAutomaton, loop: Sequence[int]) -> FrozenSet[int]:
    """States q such that some run on loop^omega from (q, 0) is accepting.

    Works on the product of A with the loop positions: find accepting product
    nodes that lie on a cycle, then everything that can reach one.
    """
    l = len(loop)
    succ: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}
    pred: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}
    for q in range(A.n_states):
        for j in range(l):
            node = (q, j)
            outs = [(e.dst, (j + 1) % l) for e in A.out[q] if e.enabled(loop[j])]
            succ[node] = outs
            for o in outs:
                pred.setdefault(o, []).append(node)
    good = set()
    for q in A.accepting:
        for j in range(l):
            start = (q, j)
            stack = list(succ[start])
            seen = set(stack)
            found = start in seen
            while stack and not found:
                x = stack.pop()
                for y in succ[x]:
                    if y == start:
                        found = True
                        break
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            if found:
                good.add(start)
    reach = set(good)
    stack = list(good)
    while stack:
        x = stack.pop()
        for y in pred.get(x, ()):
            if y not in reach:
                reach.add(y)
                stack.append(y)
    return frozenset(q for (q, j) in reach if j == 0)


class LassoChecker:
    """Memoizing acceptance test for many lassos against one automaton."""

    def __init__(self, A: BuchiAutomaton):
        self.A = A
        self.index = {p: i for i, p in enumerate(A.alphabet)}
        self._prefix: Dict[tuple, FrozenSet[int]] = {}
        self._loop: Dict[tuple, FrozenSet[int]] = {}

    def accepts_masks(self, prefix: Sequence[int], loop: Sequence[int]) -> bool:
        pk = tuple(prefix)
        reach = self._prefix.get(pk)
        if reach is None:
            reach = self._prefix[pk] = _reach_after(self.A, pk)
        if not reach:
            return False
        lk = tuple(loop)
        win = self._loop.get(lk)
        if win is None:
            win = self._loop[lk] = _loop_winning(self.A, lk)
        return not reach.isdisjoint(win)

    def accepts(self, w: LassoWord) -> bool:
        return self.accepts_masks(
            [int(x) for x in encode_letters(w.prefix, self.index)],
            [int(x) for x in encode_letters(w.loop, self.index)],
        )


def nba_accepts_lasso(A: BuchiAutomaton, w: LassoWord) -> bool:
    """Whether some run of ``A`` on ``prefix . loop^omega`` is accepting."""
    return LassoChecker(A).accepts(w)
