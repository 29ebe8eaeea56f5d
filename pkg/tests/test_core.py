import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from asyncdyn.core import (Configuration, Flags, ReactionFn, SizeGuardError, SpecError,
                           SystemSpec, apply_activation, check_size, detect_stabilization,
                           historyless_spec, make_dist, point, run_dynamics, sample,
                           tabulate, verify_flags)
from asyncdyn.analysis import enumerate_stable_states
from asyncdyn.generators import make_example, random_binary, random_self_independent
from asyncdyn.schedules import RandomFair, RoundRobin, ScheduleWitness


def constant_system(n, value="x"):
    return historyless_spec([("x", "y")] * n, [lambda a: value] * n)


def test_pair_flip_single_activation():
    spec = make_example("ex2")
    cfg = apply_activation(spec, spec.initial(("x", "x")), {0})
    assert cfg.profile == ("y", "x")


def test_fixed_point_survives_full_activation():
    spec = make_example("ex3", 4)
    cfg = apply_activation(spec, spec.initial(("x",) * 4), range(4))
    assert cfg.profile == ("x",) * 4


def test_unanimity_pair_step():
    spec = make_example("ex3", 4)
    cfg = apply_activation(spec, spec.initial(("y", "x", "x", "x")), {0, 1})
    assert cfg.profile == ("x", "y", "x", "x")


def test_unanimity_pair_cycle_never_settles():
    spec = make_example("ex3", 4)
    w = ScheduleWitness((), ({0, 1}, {1, 2}, {2, 3}, {3, 0}))
    trace = run_dynamics(spec, spec.initial(("y", "x", "x", "x")), w, 8)
    profs = trace.profiles
    assert all(a != b for a, b in zip(profs, profs[1:]))
    assert detect_stabilization(trace, spec) is None


def test_constant_system_reaches_constant():
    n = 4
    trace = run_dynamics(constant_system(n), constant_system(n).initial(("y",) * n),
                         RandomFair(n, n, seed=3), 2 * n)
    assert trace.profiles[-1] == ("x",) * n


def test_latch_alternating_singletons_settle_on_xx():
    spec = make_example("ex1")
    trace = run_dynamics(spec, spec.initial(("y", "x")), RoundRobin(2), 10)
    assert trace.profiles[-1] == ("x", "x")
    assert detect_stabilization(trace, spec) == ("x", "x")


def test_no_fixed_point_never_stabilizes():
    inverter = historyless_spec([("0", "1")], [lambda a: "1" if a[0] == "0" else "0"])
    trace = run_dynamics(inverter, inverter.initial(("0",)), RoundRobin(1), 6)
    assert detect_stabilization(trace, inverter) is None


def test_flags_of_examples():
    rep2 = verify_flags(make_example("ex2"))
    assert not rep2["self_independent"].holds
    assert rep2["self_independent"].counterexample is not None
    rep3 = verify_flags(make_example("ex3", 4))
    assert rep3["self_independent"].holds and rep3["historyless"].holds
    assert all(c.holds for c in verify_flags(constant_system(3)).values())


def test_size_guard_refuses():
    with pytest.raises(SizeGuardError):
        check_size(2**24 + 1)


def test_incomplete_table_rejected():
    with pytest.raises(SpecError):
        SystemSpec([("x", "y")], [ReactionFn.from_table({((("x",),)): point("x")})])


def test_distribution_must_sum_to_one():
    with pytest.raises(SpecError):
        make_dist({"x": Fraction(1, 2), "y": Fraction(1, 3)})


def test_empty_activation_rejected():
    spec = make_example("ex2")
    with pytest.raises(SpecError):
        apply_activation(spec, spec.initial(("x", "x")), set())


def test_exact_sampling_frequencies():
    dist = make_dist({"a": Fraction(1, 4), "b": Fraction(3, 4)})
    rng = random.Random(5)
    draws = [sample(dist, rng) for _ in range(4000)]
    assert abs(draws.count("a") / 4000 - 0.25) < 0.03


def test_recall_two_window_shifts():
    # node copies what the other node did one step earlier
    alph = ("0", "1")
    profs = list(itertools.product(alph, repeat=2))
    windows = list(itertools.product(profs, repeat=2))
    r0 = ReactionFn.from_table({w: point(w[0][1]) for w in windows})
    r1 = ReactionFn.from_table({w: point(w[0][0]) for w in windows})
    spec = SystemSpec([alph, alph], [r0, r1], recall_k=2, flags=Flags(historyless=False))
    cfg = spec.initial(("1", "0"), ("0", "0"))
    cfg2 = apply_activation(spec, cfg, {0, 1})
    assert cfg2.window == (("0", "0"), ("0", "1"))


def test_tabulate_matches_named():
    spec = make_example("ex3", 4)
    tab = tabulate(spec)
    for w in spec.windows():
        for i in range(spec.n):
            assert tab.react(i, w, 5) == spec.react(i, w, 5)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(0, 10**6), st.integers(0, 10**6))
def test_frame_property_and_replay(n, sys_seed, run_seed):
    spec = random_binary(n, random.Random(sys_seed))
    init = spec.initial(tuple(random.Random(run_seed).choice("xy") for _ in range(n)))
    t1 = run_dynamics(spec, init, RandomFair(n, 2, seed=run_seed), 30, seed=run_seed)
    t2 = run_dynamics(spec, init, RandomFair(n, 2, seed=run_seed), 30, seed=run_seed)
    assert t1 == t2
    prev = init.profile
    for active, prof in t1.steps:
        assert all(prof[i] == prev[i] for i in range(n) if i not in active)
        prev = prof
    settled = detect_stabilization(t1, spec)
    if settled is not None:
        assert settled in enumerate_stable_states(spec)


def _self_independent_bruteforce(spec, i):
    # change node i's own coordinate in every way and watch for a different output
    for p in spec.profiles():
        base = spec.react(i, (p,), 2)
        for s in spec.alphabets[i]:
            q = p[:i] + (s,) + p[i + 1:]
            if spec.react(i, (q,), 2) != base:
                return False
    return True


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10**6), st.booleans())
def test_self_independence_matches_perturbation(n, seed, force):
    rng = random.Random(seed)
    spec = random_self_independent(n, rng) if force else random_binary(n, rng)
    report = verify_flags(spec)
    want = all(_self_independent_bruteforce(spec, i) for i in range(n))
    assert report["self_independent"].holds == want
