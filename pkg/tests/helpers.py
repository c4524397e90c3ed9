"""Test-side oracles and generators, written independently of the package code."""
from __future__ import annotations

import re
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from ltlppo.ltl import (
    FALSE,
    TRUE,
    Always,
    And,
    Atom,
    Eventually,
    FalseF,
    Next,
    Not,
    Or,
    Release,
    TrueF,
    Until,
)

# ---------------------------------------------------------------------------
# LTL oracle: direct recursion over lasso positions, no fixpoint vectors.


def oracle_holds(f, prefix: Sequence[FrozenSet[str]], loop: Sequence[FrozenSet[str]], i: int = 0) -> bool:
    letters = list(prefix) + list(loop)
    n = len(letters)
    p = len(prefix)

    def nxt(j):
        return j + 1 if j + 1 < n else p

    def path(j):
        # positions j, nxt(j), ... until the first repeat; covers every
        # distinct suffix reachable from j
        seen, out = set(), []
        while j not in seen:
            seen.add(j)
            out.append(j)
            j = nxt(j)
        return out

    def sat(g, j) -> bool:
        if isinstance(g, TrueF):
            return True
        if isinstance(g, FalseF):
            return False
        if isinstance(g, Atom):
            return g.name in letters[j]
        if isinstance(g, Not):
            return not sat(g.child, j)
        if isinstance(g, And):
            return sat(g.left, j) and sat(g.right, j)
        if isinstance(g, Or):
            return sat(g.left, j) or sat(g.right, j)
        if isinstance(g, Next):
            return sat(g.child, nxt(j))
        if isinstance(g, Eventually):
            return any(sat(g.child, k) for k in path(j))
        if isinstance(g, Always):
            return all(sat(g.child, k) for k in path(j))
        if isinstance(g, Until):
            for k in path(j):
                if sat(g.right, k):
                    return True
                if not sat(g.left, k):
                    return False
            return False
        if isinstance(g, Release):
            # a R b  ==  !(!a U !b)
            for k in path(j):
                if not sat(g.right, k):
                    return False
                if sat(g.left, k):
                    return True
            return True
        raise TypeError(g)

    return sat(f, i)


# ---------------------------------------------------------------------------
# random formulas


def random_nnf(rng: np.random.Generator, props: Sequence[str], size: int):
    """A random NNF formula with exactly ``size`` nodes (negated atoms count as 2)."""
    if size <= 1:
        k = rng.integers(len(props) + 2)
        if k == len(props):
            return TRUE
        if k == len(props) + 1:
            return FALSE
        return Atom(props[k])
    if size == 2:
        if rng.random() < 0.5:
            return Not(Atom(props[rng.integers(len(props))]))
        op = [Next, Always, Eventually][rng.integers(3)]
        return op(random_nnf(rng, props, 1))
    if rng.random() < 0.3:
        op = [Next, Always, Eventually][rng.integers(3)]
        return op(random_nnf(rng, props, size - 1))
    op = [And, Or, Until, Release][rng.integers(4)]
    left = int(rng.integers(1, size - 1))
    return op(random_nnf(rng, props, left), random_nnf(rng, props, size - 1 - left))


def random_prop(rng: np.random.Generator, props: Sequence[str], depth: int = 2):
    if depth == 0 or rng.random() < 0.35:
        a = Atom(props[rng.integers(len(props))])
        return Not(a) if rng.random() < 0.4 else a
    op = And if rng.random() < 0.5 else Or
    return op(random_prop(rng, props, depth - 1), random_prop(rng, props, depth - 1))


def random_reach_avoid(rng: np.random.Generator, props: Sequence[str]):
    """A formula built from the reach-avoid grammar: nested (!avoid U (reach & rest)),
    F stages, and an optional G safety conjunct."""
    n_stages = int(rng.integers(0, 3))
    body = None
    for _ in range(n_stages):
        reach = random_prop(rng, props, 1)
        goal = reach if body is None else And(reach, body)
        if rng.random() < 0.4:
            body = Eventually(goal)
        else:
            body = Until(Not(random_prop(rng, props, 1)), goal)
    if body is None or rng.random() < 0.4:
        safety = Always(random_prop(rng, props, 1))
        return safety if body is None else And(body, safety)
    return body


# ---------------------------------------------------------------------------
# HOA re-parse checker (independent of the emitter)

_HEADER = re.compile(r"^([A-Za-z@][\w-]*):\s*(.*)$")


class HOAError(ValueError):
    pass


def _eval_label(text: str, valuation: Dict[int, bool]) -> bool:
    tokens = re.findall(r"\d+|[tf]|[!&|()]", text)
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take():
        nonlocal pos
        pos += 1
        return tokens[pos - 1]

    def disj():
        v = conj()
        while peek() == "|":
            take()
            v = conj() or v
        return v

    def conj():
        v = unary()
        while peek() == "&":
            take()
            v = unary() and v
        return v

    def unary():
        t = take()
        if t == "!":
            return not unary()
        if t == "(":
            v = disj()
            if take() != ")":
                raise HOAError("unbalanced label")
            return v
        if t == "t":
            return True
        if t == "f":
            return False
        if t is not None and t.isdigit():
            if int(t) not in valuation:
                raise HOAError(f"AP index {t} out of range")
            return valuation[int(t)]
        raise HOAError(f"bad label token {t!r}")

    v = disj()
    if pos != len(tokens):
        raise HOAError(f"trailing tokens in label {text!r}")
    return v


class ParsedHOA:
    def __init__(self, text: str):
        if "--BODY--" not in text or "--END--" not in text:
            raise HOAError("missing body markers")
        head, rest = text.split("--BODY--", 1)
        body, _ = rest.split("--END--", 1)
        self.headers: Dict[str, str] = {}
        for line in head.strip().splitlines():
            m = _HEADER.match(line.strip())
            if not m:
                raise HOAError(f"bad header line {line!r}")
            self.headers[m.group(1)] = m.group(2)
        if self.headers.get("HOA") != "v1":
            raise HOAError("first header must be HOA: v1")
        self.n_states = int(self.headers["States"])
        self.start = int(self.headers["Start"])
        ap = re.findall(r'"((?:[^"\\]|\\.)*)"', self.headers["AP"])
        if int(self.headers["AP"].split()[0]) != len(ap):
            raise HOAError("AP count does not match names")
        self.aps = ap
        if self.headers.get("Acceptance") != "1 Inf(0)":
            raise HOAError("expected Buchi acceptance")
        self.accepting = set()
        self.edges: List[Tuple[int, str, int]] = []
        state = None
        for line in body.strip().splitlines():
            line = line.strip()
            if line.startswith("State:"):
                m = re.match(r'State:\s*(\d+)(?:\s+"[^"]*")?\s*(\{0\})?$', line)
                if not m:
                    raise HOAError(f"bad state line {line!r}")
                state = int(m.group(1))
                if m.group(2):
                    self.accepting.add(state)
                continue
            m = re.match(r"\[(.*)\]\s+(\d+)$", line)
            if not m or state is None:
                raise HOAError(f"bad edge line {line!r}")
            self.edges.append((state, m.group(1), int(m.group(2))))
        for s, _, d in self.edges:
            if not (0 <= s < self.n_states and 0 <= d < self.n_states):
                raise HOAError("edge endpoint out of range")
        if not 0 <= self.start < self.n_states:
            raise HOAError("start state out of range")

    def successors(self, state: int, letter) -> List[int]:
        val = {i: (p in letter) for i, p in enumerate(self.aps)}
        return [d for s, lab, d in self.edges if s == state and _eval_label(lab, val)]

    def accepts_lasso(self, prefix, loop) -> bool:
        """Nondeterministic Buchi acceptance on prefix.loop^omega by product search."""
        cur = {self.start}
        for a in prefix:
            cur = {d for q in cur for d in self.successors(q, a)}
        L = len(loop)
        nodes = {(q, 0) for q in cur}
        # all product nodes reachable from the loop entry
        stack, reach = list(nodes), set(nodes)
        while stack:
            q, j = stack.pop()
            for d in self.successors(q, loop[j]):
                n = (d, (j + 1) % L)
                if n not in reach:
                    reach.add(n)
                    stack.append(n)
        # an accepting node that can return to itself
        for node in reach:
            if node[0] not in self.accepting:
                continue
            stack, seen = [node], set()
            while stack:
                q, j = stack.pop()
                for d in self.successors(q, loop[j]):
                    n = (d, (j + 1) % L)
                    if n == node:
                        return True
                    if n not in seen:
                        seen.add(n)
                        stack.append(n)
        return False


def all_lassos(props: Sequence[str], max_prefix: int = 3, max_loop: int = 2):
    import itertools

    letters = [frozenset(c) for r in range(len(props) + 1) for c in itertools.combinations(props, r)]
    for p in range(max_prefix + 1):
        for l in range(1, max_loop + 1):
            for pre in itertools.product(letters, repeat=p):
                for lp in itertools.product(letters, repeat=l):
                    yield pre, lp
