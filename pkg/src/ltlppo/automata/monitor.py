"""Deterministic runtime monitors for reach-avoid sequences.

Stage ``i`` of a sequence may be left as soon as its reach condition holds,
but may also keep waiting while its avoid condition stays false; when a later
stage has stricter avoid conditions, waiting can be the only way to succeed.
The monitor therefore tracks the set of stages still consistent with the
observed prefix (a subset construction over the linear stage automaton).
In the common case every reachable set is a singleton and the states are just
``stage_0 .. stage_{k-1}``.

After the last stage the monitor enters ``ACCEPT`` (an accepting sink) or,
when a global safety condition exists, ``SAFE``: an accepting state that still
moves to ``REJECT`` on a safety violation. Dead stage sets collapse into
``REJECT`` and stage sets that cannot fail collapse into ``ACCEPT``, so the
verdicts are exact good/bad prefix classifications.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..ltl.formula import FALSE, TRUE, Atom, Formula, Not, eval_prop, mk_and, mk_or
from ..ltl.semantics import LassoWord
from .reach_avoid import ReachAvoidSequence

MAX_MONITOR_ATOMS = 16


class MonitorEvent(enum.IntEnum):
    NONE = 0
    SUBTASK_COMPLETE = 1
    VIOLATION = 2
    SATISFIED = 3


@dataclass(frozen=True)
class MonitorAutomaton:
    names: Tuple[str, ...]
    atoms: Tuple[str, ...]
    initial: int
    final: int
    reject: int
    delta: np.ndarray  # (n_states, 2**len(atoms)) next state
    events: np.ndarray  # same shape, MonitorEvent codes
    progress_level: Tuple[int, ...]
    has_safety: bool

    @property
    def n_states(self) -> int:
        return len(self.names)

    @property
    def sinks(self) -> FrozenSet[int]:
        out = {self.reject}
        if not self.has_safety:
            out.add(self.final)
        return frozenset(out)

    def mask(self, letter: Iterable[str]) -> int:
        m = 0
        for i, p in enumerate(self.atoms):
            if p in letter:
                m |= 1 << i
        return m

    def step(self, state: int, letter: Iterable[str]) -> Tuple[int, MonitorEvent]:
        m = self.mask(letter)
        return int(self.delta[state, m]), MonitorEvent(int(self.events[state, m]))

    def run(self, letters: Iterable[Iterable[str]], state: Optional[int] = None) -> int:
        q = self.initial if state is None else state
        for a in letters:
            q = int(self.delta[q, self.mask(a)])
        return q

    def classify(self, letters: Iterable[Iterable[str]]) -> str:
        """'accept', 'reject' or 'pending' for a finite prefix."""
        q = self.run(letters)
        if q == self.reject:
            return "reject"
        if q == self.final and not self.has_safety:
            return "accept"
        return "pending"

    def accepts_lasso(self, w: LassoWord) -> bool:
        """Deterministic Buchi acceptance: the final state recurs on the loop."""
        q = self.run(w.prefix)
        loop = [self.mask(a) for a in w.loop]
        seen: Dict[Tuple[int, int], int] = {}
        trail: List[int] = []
        j = 0
        while (q, j) not in seen:
            seen[(q, j)] = len(trail)
            trail.append(q)
            q = int(self.delta[q, loop[j]])
            j = (j + 1) % len(loop)
        cycle = trail[seen[(q, j)]:]
        return self.final in cycle

    def edges(self) -> List[Tuple[int, Formula, int]]:
        """Transitions grouped by (source, target) with a propositional label."""
        out = []
        n_letters = self.delta.shape[1]
        for s in range(self.n_states):
            groups: Dict[int, List[int]] = {}
            for m in range(n_letters):
                groups.setdefault(int(self.delta[s, m]), []).append(m)
            for d in sorted(groups):
                out.append((s, minterms_to_formula(groups[d], self.atoms), d))
        return out


def _implicants(masks: Sequence[int], n_bits: int) -> List[Tuple[int, int]]:
    """Prime implicants (value, care-mask) of a set of minterms (Quine-McCluskey merge step)."""
    full = (1 << n_bits) - 1
    current = {(m, full) for m in masks}
    primes = set()
    while current:
        merged = set()
        used = set()
        items = sorted(current)
        for i, (v1, c1) in enumerate(items):
            for v2, c2 in items[i + 1:]:
                if c1 != c2:
                    continue
                diff = (v1 ^ v2) & c1
                if diff and diff & (diff - 1) == 0:
                    merged.add((v1 & ~diff, c1 & ~diff))
                    used.add((v1, c1))
                    used.add((v2, c2))
        primes |= current - used
        current = merged
    # greedy cover of the minterms
    remaining = set(masks)
    chosen = []
    for v, c in sorted(primes, key=lambda t: (bin(t[1]).count("1"), t)):
        cov = {m for m in remaining if m & c == v}
        if cov:
            chosen.append((v, c))
            remaining -= cov
        if not remaining:
            break
    return chosen


def minterms_to_formula(masks: Sequence[int], atoms: Sequence[str]) -> Formula:
    n = len(atoms)
    if len(masks) == 1 << n:
        return TRUE
    if not masks:
        return FALSE
    terms = []
    for v, c in _implicants(masks, n):
        lits = []
        for i, p in enumerate(atoms):
            if (c >> i) & 1:
                lits.append(Atom(p) if (v >> i) & 1 else Not(Atom(p)))
        terms.append(mk_and(*lits) if lits else TRUE)
    return mk_or(*terms)


def compile_monitor(seq: ReachAvoidSequence, atoms: Optional[Sequence[str]] = None) -> MonitorAutomaton:
    """Build the deterministic monitor for ``seq``.

    ``atoms`` fixes the proposition order of letter masks (defaults to the
    sorted atoms of the sequence); at most 16 are supported.
    """
    names_ = tuple(sorted(seq.atoms())) if atoms is None else tuple(atoms)
    if len(names_) > MAX_MONITOR_ATOMS:
        raise ValueError(f"monitor over {len(names_)} atoms exceeds {MAX_MONITOR_ATOMS}")
    n_letters = 1 << len(names_)
    letters = [frozenset(p for i, p in enumerate(names_) if (m >> i) & 1) for m in range(n_letters)]
    k = len(seq.stages)
    glob = seq.global_safety
    has_safety = glob is not None and glob != TRUE

    g_ok = [True if not has_safety else eval_prop(glob, a) for a in letters]
    reach = [[eval_prop(st.reach, a) for a in letters] for st in seq.stages]
    stay = [[not eval_prop(st.avoid, a) for a in letters] for st in seq.stages]

    FINAL = "final"

    def consume(i: int, m: int) -> set:
        out = set()
        if not g_ok[m]:
            return out
        j = i
        while True:
            if stay[j][m]:
                out.add(j)
            if reach[j][m]:
                j += 1
                if j == k:
                    out.add(FINAL)
                    break
                continue
            break
        return out

    def successor(state, m: int):
        if state == FINAL:
            return FINAL if g_ok[m] else frozenset()
        nxt = set()
        for i in state:
            nxt |= consume(i, m)
        if FINAL in nxt:
            return FINAL
        return frozenset(nxt)

    start = FINAL if k == 0 else frozenset({0})
    order = [start]
    index = {start: 0}
    trans: Dict[object, List[object]] = {}
    i = 0
    while i < len(order):
        s = order[i]
        i += 1
        row = []
        for m in range(n_letters):
            t = successor(s, m)
            row.append(t)
            if t not in index:
                index[t] = len(order)
                order.append(t)
        trans[s] = row
    empty = frozenset()

    # liveness: can reach FINAL, and FINAL can loop
    final_live = any(g_ok)
    live = set()
    if final_live and FINAL in index:
        live.add(FINAL)
        changed = True
        while changed:
            changed = False
            for s in order:
                if s not in live and s != empty and any(t in live for t in trans[s]):
                    live.add(s)
                    changed = True
    # universality (only without safety): every path reaches FINAL
    universal = set()
    if not has_safety and final_live and FINAL in index:
        universal.add(FINAL)
        changed = True
        while changed:
            changed = False
            for s in order:
                if s not in universal and all(t in universal for t in trans[s]):
                    universal.add(s)
                    changed = True

    def canon(s):
        if s in universal:
            return FINAL
        if s not in live:
            return empty
        return s

    stage_states = []
    for s in order:
        c = canon(s)
        if c not in (FINAL, empty) and c not in stage_states:
            stage_states.append(c)

    def label(s) -> str:
        idx = sorted(s)
        if len(idx) == 1:
            return f"stage_{idx[0]}"
        return "stage_{" + ",".join(map(str, idx)) + "}"

    names = [label(s) for s in stage_states] + ["SAFE" if has_safety else "ACCEPT", "REJECT"]
    sid = {s: j for j, s in enumerate(stage_states)}
    final_id = len(stage_states)
    reject_id = final_id + 1
    sid[FINAL] = final_id
    sid[empty] = reject_id

    n = len(names)
    delta = np.zeros((n, n_letters), dtype=np.int64)
    events = np.zeros((n, n_letters), dtype=np.int64)
    level = [max(s) for s in stage_states] + [k, -1]
    for s in order:
        c = canon(s)
        src = sid[c]
        if src in (reject_id,) or (src == final_id and s != FINAL):
            continue
        for m in range(n_letters):
            dst = sid[canon(trans[s][m])]
            delta[src, m] = dst
            if dst == src:
                ev = MonitorEvent.NONE
            elif dst == reject_id:
                ev = MonitorEvent.VIOLATION
            elif dst == final_id:
                ev = MonitorEvent.SATISFIED
            elif level[dst] > level[src]:
                ev = MonitorEvent.SUBTASK_COMPLETE
            else:
                ev = MonitorEvent.NONE
            events[src, m] = ev
    delta[reject_id, :] = reject_id
    if not has_safety:
        delta[final_id, :] = final_id
    else:
        for m in range(n_letters):
            delta[final_id, m] = final_id if g_ok[m] else reject_id
            events[final_id, m] = MonitorEvent.NONE if g_ok[m] else MonitorEvent.VIOLATION
    initial = sid[canon(start)]
    return MonitorAutomaton(
        names=tuple(names),
        atoms=names_,
        initial=initial,
        final=final_id,
        reject=reject_id,
        delta=delta,
        events=events,
        progress_level=tuple(level),
        has_safety=has_safety,
    )
