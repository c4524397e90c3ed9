import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltlppo.automata import (
    CapacityExceeded,
    LassoChecker,
    MonitorEvent,
    ReachAvoidSequence,
    Stage,
    UnsupportedFragment,
    compile_monitor,
    export_hoa,
    ltl_to_nba,
    minterms_to_formula,
    nba_accepts_lasso,
    reach_avoid_decompose,
)
from ltlppo.ltl import FALSE, Atom, LassoWord, Not, eval_prop, holds_on_lasso, letter, parse, to_nnf

from helpers import ParsedHOA, all_lassos, oracle_holds, random_nnf, random_reach_avoid

PROPS = ["p", "q"]
LASSOS = list(all_lassos(PROPS, 3, 2))


def monitor_for(text, atoms=None):
    return compile_monitor(reach_avoid_decompose(parse(text)), atoms)


# ---------------------------------------------------------------------- NBA
def test_g_not_p_is_one_state():
    A = ltl_to_nba(to_nnf(parse("G !p")), ["p"])
    assert A.n_states == 1 and A.accepting == {0}
    assert not nba_accepts_lasso(A, LassoWord((), (letter("p"),)))
    assert nba_accepts_lasso(A, LassoWord((), (letter(),)))


def test_f_g_is_two_states():
    A = ltl_to_nba(to_nnf(parse("F g")), ["g"])
    assert A.n_states == 2
    assert len(A.accepting) == 1
    assert nba_accepts_lasso(A, LassoWord((letter("g"),), (letter(),)))
    assert not nba_accepts_lasso(A, LassoWord((), (letter(),)))


def test_true_is_universal():
    A = ltl_to_nba(parse("true"), ["p"])
    assert A.n_states == 1 and A.accepting == {0}
    assert all(nba_accepts_lasso(A, LassoWord(pre, lp)) for pre, lp in all_lassos(["p"], 2, 2))


def test_until_rejects_avoid_first():
    A = ltl_to_nba(to_nnf(parse("!b U g")), ["b", "g"])
    w = LassoWord((letter("b"),), (letter("g"),))
    assert not nba_accepts_lasso(A, w)
    assert not holds_on_lasso(parse("!b U g"), w)


def test_capacity_bound():
    with pytest.raises(CapacityExceeded):
        ltl_to_nba(to_nnf(parse("G F p & G F q & (p U q) & X X p")), ["p", "q"], bound=3)


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_nba_matches_oracle(seed, size):
    f = random_nnf(np.random.default_rng(seed), PROPS, size)
    checker = LassoChecker(ltl_to_nba(f, PROPS))
    for pre, lp in LASSOS:
        assert checker.accepts(LassoWord(pre, lp)) == oracle_holds(f, pre, lp)


def test_nba_pruned_to_reachable():
    A = ltl_to_nba(to_nnf(parse("(p U q) & G F p")), PROPS)
    seen, stack = {A.initial}, [A.initial]
    while stack:
        s = stack.pop()
        for e in A.out[s]:
            if e.dst not in seen:
                seen.add(e.dst)
                stack.append(e.dst)
    assert seen == set(range(A.n_states))


# ------------------------------------------------------------ decomposition
def test_decompose_goal_and_safety():
    seq = reach_avoid_decompose(parse("F goal & G !collision"))
    assert seq.stages == (Stage(Atom("goal"), FALSE),)
    assert seq.global_safety == Not(Atom("collision"))


def test_decompose_until():
    seq = reach_avoid_decompose(parse("!blue U green"))
    assert seq.stages == (Stage(Atom("green"), Atom("blue")),)
    assert seq.global_safety is None


def test_decompose_nested():
    seq = reach_avoid_decompose(parse("!blue U (green & F yellow)"))
    assert [s.reach for s in seq.stages] == [Atom("green"), Atom("yellow")]
    assert [s.avoid for s in seq.stages] == [Atom("blue"), FALSE]


@pytest.mark.parametrize("text", ["F p & F q", "G F p", "p U X q", "F p | F q", "X p"])
def test_unsupported(text):
    with pytest.raises(UnsupportedFragment) as e:
        reach_avoid_decompose(parse(text))
    assert e.value.subformula is not None


def test_sequence_needs_content():
    with pytest.raises(ValueError):
        ReachAvoidSequence(())


# ------------------------------------------------------------------ monitor
def test_until_monitor_table():
    A = monitor_for("!blue U green")
    assert A.n_states == 3
    q, ev = A.step(A.initial, {"blue"})
    assert q == A.reject and ev == MonitorEvent.VIOLATION
    q, ev = A.step(A.initial, {"green"})
    assert q == A.final and ev == MonitorEvent.SATISFIED
    q, ev = A.step(A.initial, set())
    assert q == A.initial and ev == MonitorEvent.NONE


def test_simultaneous_reach_and_avoid_follows_semantics():
    # the formula is satisfied when green and blue arrive together
    f = parse("!blue U green")
    A = monitor_for("!blue U green")
    q, ev = A.step(A.initial, {"blue", "green"})
    assert holds_on_lasso(f, LassoWord((letter("blue", "green"),), (letter(),)))
    assert q == A.final and ev == MonitorEvent.SATISFIED


def test_two_stage_events():
    A = monitor_for("!blue U (green & F yellow)")
    q, ev = A.step(A.initial, {"green"})
    assert ev == MonitorEvent.SUBTASK_COMPLETE
    q, ev = A.step(q, {"blue"})
    assert ev == MonitorEvent.NONE  # blue is allowed after green
    q, ev = A.step(q, {"yellow"})
    assert q == A.final and ev == MonitorEvent.SATISFIED


def test_pure_safety_monitor():
    A = monitor_for("G !collision")
    q, ev = A.step(A.initial, set())
    assert q == A.initial and ev == MonitorEvent.NONE
    assert q not in A.sinks
    q, ev = A.step(q, {"collision"})
    assert q == A.reject and ev == MonitorEvent.VIOLATION


def test_total_deterministic_and_sinks_silent():
    for text in ["!a U (b & F c)", "F a & G !b", "G !a", "F (a & F (b & F c))"]:
        A = monitor_for(text)
        n_letters = 1 << len(A.atoms)
        assert A.delta.shape == (A.n_states, n_letters)
        assert np.all((A.delta >= 0) & (A.delta < A.n_states))
        for s in A.sinks:
            assert np.all(A.delta[s] == s)
            assert np.all(A.events[s] == MonitorEvent.NONE)


def _extensions_disagree(f, letters):
    sat = vio = False
    for pre, lp in all_lassos(PROPS, 1, 2):
        v = oracle_holds(f, list(letters) + list(pre), lp)
        sat |= v
        vio |= not v
        if sat and vio:
            return True
    return False


@settings(max_examples=80)
@given(st.integers(0, 2**32 - 1))
def test_monitor_matches_oracle(seed):
    f = random_reach_avoid(np.random.default_rng(seed), PROPS)
    A = compile_monitor(reach_avoid_decompose(f), PROPS)
    for pre, lp in LASSOS:
        truth = oracle_holds(f, pre, lp)
        assert A.accepts_lasso(LassoWord(pre, lp)) == truth
        verdict = A.classify(list(pre))
        if verdict == "accept":
            assert truth
        elif verdict == "reject":
            assert not truth


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_pending_prefixes_are_undecided(seed):
    f = random_reach_avoid(np.random.default_rng(seed), PROPS)
    A = compile_monitor(reach_avoid_decompose(f), PROPS)
    letters = [frozenset(c) for r in range(3) for c in itertools.combinations(PROPS, r)]
    for n in range(3):
        for prefix in itertools.product(letters, repeat=n):
            if A.classify(prefix) == "pending":
                assert _extensions_disagree(f, prefix)


def test_minterms_to_formula():
    atoms = ["a", "b", "c"]
    for masks in [[0], [1, 3], [0, 1, 2, 3, 4, 5, 6, 7], [5, 7, 6], []]:
        f = minterms_to_formula(masks, atoms)
        for m in range(8):
            a = {p for i, p in enumerate(atoms) if (m >> i) & 1}
            assert eval_prop(f, a) == (m in masks)


# ---------------------------------------------------------------------- HOA
def test_hoa_safety_monitor():
    text = export_hoa(monitor_for("G !p"))
    h = ParsedHOA(text)
    assert h.n_states == 1
    assert "States: 1" in text and "Acceptance: 1 Inf(0)" in text


def test_hoa_nba_f_g():
    A = ltl_to_nba(to_nnf(parse("F g")), ["g"])
    h = ParsedHOA(export_hoa(A))
    assert h.n_states == 2 and h.aps == ["g"]
    assert h.accepts_lasso([frozenset({"g"})], [frozenset()])
    assert not h.accepts_lasso([], [frozenset()])


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_hoa_reparse_preserves_language(seed, size):
    f = random_nnf(np.random.default_rng(seed), PROPS, size)
    A = ltl_to_nba(f, PROPS)
    h = ParsedHOA(export_hoa(A))
    for pre, lp in all_lassos(PROPS, 2, 2):
        assert h.accepts_lasso(pre, lp) == oracle_holds(f, pre, lp)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_hoa_monitor_language(seed):
    f = random_reach_avoid(np.random.default_rng(seed), PROPS)
    h = ParsedHOA(export_hoa(compile_monitor(reach_avoid_decompose(f), PROPS)))
    for pre, lp in all_lassos(PROPS, 2, 2):
        assert h.accepts_lasso(pre, lp) == oracle_holds(f, pre, lp)
