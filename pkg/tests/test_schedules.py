import itertools

import pytest
from hypothesis import given, settings, strategies as st

from asyncdyn.formats import ParseError
from asyncdyn.schedules import (AllSubsetsEnumerator, RandomFair, RoundRobin, ScheduleError,
                                ScheduleWitness, format_witness, make_schedule, parse_witness,
                                schedule_r, window_is_r_fair, witness_is_r_fair)

RR3 = ScheduleWitness((), ({0}, {1}, {2}))


def test_round_robin_window_sizes():
    assert witness_is_r_fair(RR3, 3, 3)
    assert not witness_is_r_fair(RR3, 2, 3)


def test_pair_cycle_is_three_fair():
    w = ScheduleWitness((), ({0, 1}, {1, 2}, {2, 3}, {3, 0}))
    assert witness_is_r_fair(w, 3, 4)
    assert not witness_is_r_fair(w, 2, 4)


def test_round_robin_order():
    assert list(itertools.islice(RoundRobin(2), 4)) == [{0}, {1}, {0}, {1}]


def test_random_fair_seed_seven():
    sets = list(itertools.islice(RandomFair(3, 2, seed=7), 6))
    assert window_is_r_fair(sets, 2, 3)


def test_simultaneous_cycle_is_one_fair():
    w = make_schedule("witness", 2, witness=ScheduleWitness((), ({0, 1},)))
    assert witness_is_r_fair(w, 1, 2)
    assert schedule_r(w, 2) == 1


def test_long_window_over_short_cycle():
    # the window starting in the prefix runs through several copies of the cycle
    w = ScheduleWitness(({0},) * 3, ({1},))
    assert not witness_is_r_fair(w, 5, 2)
    w2 = ScheduleWitness(({0, 1},), ({0}, {1}))
    assert witness_is_r_fair(w2, 2, 2) and witness_is_r_fair(w2, 7, 2)


def test_all_subsets_cover():
    subsets = list(itertools.islice(AllSubsetsEnumerator(3), 7))
    assert len(set(subsets)) == 7


def test_empty_sets_rejected():
    with pytest.raises(ScheduleError):
        ScheduleWitness((), (set(),))
    with pytest.raises(ScheduleError):
        ScheduleWitness((), ())


def test_witness_text_round_trip():
    w = ScheduleWitness(({0, 2},), ({1}, {0, 1, 2}))
    text = format_witness(w, [("x", "y", "x")])
    assert text == "initial: x,y,x\n1,3\n---\n2\n1,2,3\n"
    assert parse_witness(text) == (w, [("x", "y", "x")])


def test_witness_parse_errors_have_lines():
    with pytest.raises(ParseError) as e:
        parse_witness("1,2\n---\n1,a\n", "w.txt")
    assert e.value.line == 3 and "w.txt:3" in str(e.value)
    with pytest.raises(ParseError):
        parse_witness("1,2\n")


witnesses = st.builds(
    ScheduleWitness,
    st.lists(st.frozensets(st.integers(0, 3), min_size=1), max_size=4).map(tuple),
    st.lists(st.frozensets(st.integers(0, 3), min_size=1), min_size=1, max_size=5).map(tuple),
)


@settings(max_examples=200, deadline=None)
@given(witnesses, st.integers(1, 8))
def test_r_fairness_is_monotone(w, r):
    if witness_is_r_fair(w, r, 4):
        assert witness_is_r_fair(w, r + 1, 4)
        assert w.covers(4)


@settings(max_examples=200, deadline=None)
@given(witnesses, st.integers(1, 8))
def test_r_fairness_matches_long_unrolling(w, r):
    seq = w.unroll(len(w.prefix) + 3 * len(w.cycle) + 2 * r)
    assert witness_is_r_fair(w, r, 4) == window_is_r_fair(seq, r, 4)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.integers(1, 6), st.integers(0, 10**9))
def test_random_fair_never_violates(n, r, seed):
    sets = list(itertools.islice(RandomFair(n, r, seed), 60))
    assert all(sets)
    assert window_is_r_fair(sets, r, n)
