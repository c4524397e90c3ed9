"""Decompose the reach-avoid fragment into ordered stages plus a global safety condition.

Supported shape, after NNF::

    phi   ::= conj (& conj)*
    conj  ::= G sigma | seq | true
    seq   ::= sigma_a U body          (F body is true U body)
    body  ::= sigma_r | sigma_r & seq

where every sigma is propositional. At most one ``seq`` conjunct may appear;
two independent goals have no order and are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

from ..ltl.formula import (
    FALSE,
    TRUE,
    And,
    FalseF,
    Formula,
    Release,
    TrueF,
    Until,
    mk_and,
    negate,
    simplify,
    to_nnf,
)
from ..ltl.parser import LTLError


class UnsupportedFragment(LTLError):
    def __init__(self, subformula: Formula, reason: str = "outside the reach-avoid fragment"):
        super().__init__(f"{reason}: {subformula}")
        self.subformula = subformula


@dataclass(frozen=True)
class Stage:
    reach: Formula
    avoid: Formula


@dataclass(frozen=True)
class ReachAvoidSequence:
    stages: Tuple[Stage, ...]
    global_safety: Optional[Formula] = None

    def __post_init__(self):
        if not self.stages and self.global_safety is None:
            raise ValueError("a reach-avoid sequence needs stages or a global safety condition")
        for st in self.stages:
            if not (st.reach.is_propositional and st.avoid.is_propositional):
                raise ValueError("stage conditions must be propositional")
        if self.global_safety is not None and not self.global_safety.is_propositional:
            raise ValueError("global safety must be propositional")

    def atoms(self) -> frozenset:
        out = set()
        for st in self.stages:
            out |= st.reach.atoms() | st.avoid.atoms()
        if self.global_safety is not None:
            out |= self.global_safety.atoms()
        return frozenset(out)

    def to_formula(self) -> Formula:
        """An LTL formula with exactly the semantics of this sequence."""
        from ..ltl.formula import Always, Eventually, Not

        body: Optional[Formula] = None
        for st in reversed(self.stages):
            goal = st.reach if body is None else And(st.reach, body)
            if isinstance(st.avoid, FalseF):
                body = Eventually(goal)
            else:
                body = Until(Not(st.avoid), goal)
        if self.global_safety is None:
            return body
        safety = Always(self.global_safety)
        return safety if body is None else And(body, safety)


def _conjuncts(f: Formula) -> List[Formula]:
    if isinstance(f, And):
        return _conjuncts(f.left) + _conjuncts(f.right)
    return [f]


def _sequence(f: Formula) -> List[Stage]:
    if not isinstance(f, Until) or not f.left.is_propositional:
        raise UnsupportedFragment(f)
    parts = _conjuncts(f.right)
    props = [p for p in parts if p.is_propositional]
    temporal = [p for p in parts if not p.is_propositional]
    if len(temporal) > 1:
        raise UnsupportedFragment(temporal[1], "unordered goals")
    reach = simplify(mk_and(*props)) if props else TRUE
    stage = Stage(reach=reach, avoid=simplify(negate(f.left)))
    if not temporal:
        return [stage]
    return [stage] + _sequence(temporal[0])


def reach_avoid_decompose(f: Formula) -> ReachAvoidSequence:
    """Split ``f`` into sequential reach-avoid stages and a global safety condition."""
    nnf = to_nnf(f)
    safety: List[Formula] = []
    seq_term: Optional[Formula] = None
    for c in _conjuncts(nnf):
        if isinstance(c, TrueF):
            continue
        if isinstance(c, Release) and isinstance(c.left, FalseF) and c.right.is_propositional:
            safety.append(c.right)
        elif isinstance(c, Until):
            if seq_term is not None:
                raise UnsupportedFragment(c, "unordered goals")
            seq_term = c
        else:
            raise UnsupportedFragment(c)
    stages = _sequence(seq_term) if seq_term is not None else []
    glob = simplify(mk_and(*safety)) if safety else None
    if isinstance(glob, TrueF):
        glob = None
    if not stages and glob is None:
        glob = TRUE
    return ReachAvoidSequence(tuple(stages), glob)
