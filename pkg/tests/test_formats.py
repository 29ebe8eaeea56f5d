import random
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from asyncdyn import adapters
from asyncdyn.core import (Flags, ReactionFn, SpecError, SystemSpec, make_dist, point, run_dynamics,
                           tabulate)
from asyncdyn.formats import (ParseError, format_dist, format_game, format_spec, format_trace,
                              load_spec, parse_adapter_input, parse_dist, parse_experiment,
                              parse_game, parse_spec, parse_trace)
from asyncdyn.generators import (build_disjointness_system, build_snake_system,
                                 build_string_system, find_max_snake, flipping_machine,
                                 make_example, normalize_snake, random_binary)
from asyncdyn.schedules import RandomFair

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


def round_trip(spec):
    text = format_spec(spec)
    back = parse_spec(text)
    assert back == spec
    assert format_spec(back) == text


def test_dist_text():
    d = make_dist({"x": Fraction(1, 3), "y": Fraction(2, 3)})
    assert format_dist(d) == "x:1/3 y:2/3"
    assert parse_dist("x:1/3 y:2/3") == d
    assert parse_dist("x") == point("x")


@pytest.mark.parametrize("build", [
    lambda: make_example("ex1"), lambda: make_example("ex2"),
    lambda: make_example("ex3", 5), lambda: make_example("ex4", 4),
    lambda: build_snake_system(normalize_snake(find_max_snake(3)[0])),
    lambda: build_disjointness_system([1], [], normalize_snake(find_max_snake(2)[0])),
    lambda: build_string_system(flipping_machine()),
    lambda: tabulate(make_example("ex3", 4)),
    lambda: adapters.social_to_system(adapters.mutual_graph(3, [(0, 1), (1, 2)])),
    lambda: adapters.routing_to_system(adapters.disagree()),
    lambda: adapters.congestion_to_system(adapters.opposed_priority_ring()),
])
def test_round_trip_builtins(build):
    round_trip(build())


def test_round_trip_randomized_recall_two_with_overrides():
    alph = ("a", "b")
    profs = [(s,) for s in alph]
    windows = [(p, q) for p in profs for q in profs]
    half = make_dist({"a": Fraction(1, 2), "b": Fraction(1, 2)})
    table = {w: (half if w[0] == w[1] else point(w[1][0])) for w in windows}
    fn = ReactionFn.from_table(table, {3: {windows[0]: point("b")}})
    spec = SystemSpec([alph], [fn], recall_k=2, window_w=3,
                      flags=Flags(deterministic=False, stationary=False, historyless=False))
    round_trip(spec)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32))
def test_round_trip_random_tables(n, seed):
    round_trip(random_binary(n, random.Random(seed)))


@pytest.mark.parametrize("path", sorted(SAMPLES.glob("*.spec")), ids=lambda p: p.name)
def test_sample_spec_files_round_trip(path):
    spec = load_spec(str(path))
    assert parse_spec(format_spec(spec)) == spec


@pytest.mark.parametrize("path", sorted(p for p in SAMPLES.iterdir()
                                        if p.suffix in (".game", ".netlist", ".social", ".spp",
                                                        ".congestion")), ids=lambda p: p.name)
def test_sample_adapter_files(path):
    spec = parse_adapter_input(path.read_text(), path.name)
    round_trip(spec)


def test_sample_experiment():
    path = SAMPLES / "pennies.experiment"
    cfg = parse_experiment(path.read_text(), path.name, path.parent)
    assert cfg["seeds"] == [0, 1, 2] and cfg["r"] == 3 and cfg["random_start"]


def test_game_text_round_trip():
    g = adapters.prisoners_dilemma()
    assert parse_game(format_game(g)) == g


def test_trace_round_trip():
    spec = make_example("ex3", 4)
    trace = run_dynamics(spec, spec.initial(("y", "x", "x", "x")), RandomFair(4, 3, 5), 12, seed=5)
    assert parse_trace(format_trace(trace)) == trace


@pytest.mark.parametrize("text,line", [
    ("nodes 1\nalphabet 1: x\nreact 1 | x -> y\n", 3),
    ("nodes 1\nalphabet 2: x\n", 2),
    ("alphabet 1: x\n", 1),
    ("nodes 1\nalphabet 1: x y\nreact 1 | x -> x\nreact 1 | x -> y\n", 4),
    ("nodes 1\nalphabet 1: x y\nreact 1 | x => x\n", 3),
    ("nodes 1\nalphabet 1: x y\nfrobnicate\n", 3),
    ("nodes 1\nalphabet 1: x y\nreact 1 | x -> x:1/2 y:1/3\n", 3),
    ("generator ex3\n", 1),
    ("nodes 3\nalphabet 1: x y\nalphabet 2: x y\nalphabet 3: x y\ngenerator ex3 n=4\n", 5),
])
def test_parse_errors_point_at_lines(text, line):
    with pytest.raises(ParseError) as e:
        parse_spec(text, "f.spec")
    assert e.value.line == line
    assert str(e.value).startswith("f.spec")


def test_incomplete_table_reported_at_node():
    text = "nodes 1\nalphabet 1: x y\n\nreact 1 | x -> x\n"
    with pytest.raises(ParseError) as e:
        parse_spec(text, "f.spec")
    assert e.value.line == 4 and "node 1:" in str(e.value)


def test_unwritable_symbol_refused():
    spec = SystemSpec([("a b",)], [ReactionFn.from_table({(("a b",),): point("a b")})])
    with pytest.raises(SpecError):
        format_spec(spec)


def test_adapter_kind_required():
    with pytest.raises(ParseError):
        parse_adapter_input("players 2\n")
