"""HOA v1 (Hanoi Omega-Automata) text export."""
from __future__ import annotations

from typing import Dict, List, Sequence, Tuple, Union

from ..ltl.formula import And, Atom, FalseF, Formula, Not, Or, TrueF
from .buchi import BuchiAutomaton
from .monitor import MonitorAutomaton


def _label(f: Formula, index: Dict[str, int]) -> str:
    if isinstance(f, TrueF):
        return "t"
    if isinstance(f, FalseF):
        return "f"
    if isinstance(f, Atom):
        return str(index[f.name])
    if isinstance(f, Not):
        return "!" + _wrap(f.child, index)
    if isinstance(f, And):
        return f"{_wrap(f.left, index)} & {_wrap(f.right, index)}"
    if isinstance(f, Or):
        return f"{_wrap(f.left, index)} | {_wrap(f.right, index)}"
    raise ValueError(f"edge label is not propositional: {f}")


def _wrap(f: Formula, index) -> str:
    s = _label(f, index)
    return f"({s})" if isinstance(f, (And, Or)) else s


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _render(
    name: str,
    aps: Sequence[str],
    n_states: int,
    start: int,
    accepting: set,
    edges: List[Tuple[int, Formula, int]],
    state_names: Sequence[str],
    deterministic: bool,
) -> str:
    index = {p: i for i, p in enumerate(aps)}
    props = ["trans-labels", "explicit-labels", "state-acc"]
    if deterministic:
        props.append("deterministic")
    lines = [
        "HOA: v1",
        f"name: {_quote(name)}",
        f"States: {n_states}",
        f"Start: {start}",
        "AP: " + " ".join([str(len(aps))] + [_quote(p) for p in aps]),
        "acc-name: Buchi",
        "Acceptance: 1 Inf(0)",
        "properties: " + " ".join(props),
        "--BODY--",
    ]
    by_src: Dict[int, List[Tuple[Formula, int]]] = {}
    for s, lab, d in edges:
        by_src.setdefault(s, []).append((lab, d))
    for q in range(n_states):
        acc = " {0}" if q in accepting else ""
        lines.append(f"State: {q} {_quote(state_names[q])}{acc}")
        for lab, d in by_src.get(q, []):
            lines.append(f"  [{_label(lab, index)}] {d}")
    lines.append("--END--")
    return "\n".join(lines) + "\n"


def export_hoa(A: Union[BuchiAutomaton, MonitorAutomaton], name: str = "") -> str:
    """Render an automaton as a HOA v1 document with Buchi acceptance.

    For monitors the rejecting sink is left implicit (missing edges), unless
    the monitor starts in it.
    """
    if isinstance(A, BuchiAutomaton):
        names = A.names or tuple(f"q{i}" for i in range(A.n_states))
        return _render(name, A.alphabet, A.n_states, A.initial, set(A.accepting), A.transitions, names, False)
    keep = [q for q in range(A.n_states) if q != A.reject or A.initial == A.reject]
    renum = {q: i for i, q in enumerate(keep)}
    edges = [(renum[s], lab, renum[d]) for s, lab, d in A.edges() if s in renum and d in renum]
    acc = {renum[A.final]} if A.final in renum else set()
    return _render(name, A.atoms, len(keep), renum[A.initial], acc, edges, [A.names[q] for q in keep], True)
