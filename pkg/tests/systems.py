"""Small system builders shared by the test modules."""
import itertools
import random

from asyncdyn.core import Flags, historyless_spec


def bits_spec(n, tables):
    """Binary historyless system over symbols "0"/"1"; ``tables[i][p]`` is node i's bit at bit-tuple p."""
    def react(i):
        return lambda a: str(tables[i][tuple(int(s) for s in a)])
    return historyless_spec([("0", "1")] * n, [react(i) for i in range(n)],
                            Flags(deterministic=True))


def table_react(tables):
    return lambda i, p: tables[i][p]


def all_tables(n):
    """Every binary reaction table family on n nodes."""
    profiles = list(itertools.product((0, 1), repeat=n))
    per_node = list(itertools.product((0, 1), repeat=len(profiles)))
    for choice in itertools.product(per_node, repeat=n):
        yield [dict(zip(profiles, outs)) for outs in choice]


def random_tables(n, rng: random.Random):
    profiles = list(itertools.product((0, 1), repeat=n))
    return [{p: rng.randrange(2) for p in profiles} for _ in range(n)]


def random_self_independent_tables(n, rng: random.Random):
    """Tables where node i's bit ignores coordinate i."""
    out = []
    for i in range(n):
        rest = {r: rng.randrange(2) for r in itertools.product((0, 1), repeat=n - 1)}
        out.append({p: rest[p[:i] + p[i + 1:]] for p in itertools.product((0, 1), repeat=n)})
    return out


def fixed_points(n, tables):
    return [p for p in itertools.product((0, 1), repeat=n)
            if all(tables[i][p] == p[i] for i in range(n))]
