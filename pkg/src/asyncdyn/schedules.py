"""Schedules: infinite sequences of nonempty activation sets.

Sets are ``frozenset`` of 0-based node indices.  The text format is 1-based.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class ScheduleWitness:
    """The eventually periodic schedule ``prefix . cycle . cycle . ...``."""

    prefix: tuple
    cycle: tuple

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(frozenset(s) for s in self.prefix))
        object.__setattr__(self, "cycle", tuple(frozenset(s) for s in self.cycle))
        if not self.cycle:
            raise ScheduleError("witness cycle must be nonempty")
        for s in self.prefix + self.cycle:
            if not s:
                raise ScheduleError("activation sets must be nonempty")

    def covers(self, n: int) -> bool:
        return frozenset().union(*self.cycle) >= frozenset(range(n))

    def unroll(self, length: int) -> list:
        out = list(self.prefix[:length])
        while len(out) < length:
            out.extend(self.cycle)
        return out[:length]

    def __iter__(self) -> Iterator[frozenset]:
        yield from self.prefix
        yield from itertools.cycle(self.cycle)


def witness_is_r_fair(w: ScheduleWitness, r: int, n: int) -> bool:
    """True iff every length-``r`` window of ``prefix . cycle^omega`` contains every node.

    Windows starting inside the cycle repeat with the cycle's period, so it
    is enough to check windows starting in ``prefix . cycle``.  Each such
    window may run ``r - 1`` steps past that, which can be more than one
    extra copy of the cycle when ``r`` exceeds its length.
    """
    if r < 1:
        raise ScheduleError("r must be at least 1")
    starts = len(w.prefix) + len(w.cycle)
    seq = w.unroll(starts + r - 1)
    everyone = frozenset(range(n))
    for s in range(starts):
        if frozenset().union(*seq[s:s + r]) != everyone:
            return False
    return True


def window_is_r_fair(sets: Sequence, r: int, n: int) -> bool:
    """Check every complete length-``r`` window of a finite sequence."""
    everyone = frozenset(range(n))
    return all(frozenset().union(*sets[s:s + r]) == everyone
               for s in range(len(sets) - r + 1))


class RoundRobin:
    def __init__(self, n: int):
        _check_n(n)
        self.n = n
        self.r = n

    def __iter__(self):
        for i in itertools.cycle(range(self.n)):
            yield frozenset((i,))


class RandomFair:
    """Random nonempty subsets, forcing any node idle for ``r - 1`` steps.

    Every window of ``r`` consecutive sets therefore contains every node.
    """

    def __init__(self, n: int, r: int, seed: int = 0, p: float = 0.5):
        _check_n(n)
        if r < 1:
            raise ScheduleError("r must be at least 1")
        self.n, self.r, self.seed, self.p = n, r, seed, p

    def __iter__(self):
        rng = random.Random(self.seed)
        idle = [0] * self.n
        while True:
            s = {i for i in range(self.n) if idle[i] >= self.r - 1 or rng.random() < self.p}
            if not s:
                s = {rng.randrange(self.n)}
            for i in range(self.n):
                idle[i] = 0 if i in s else idle[i] + 1
            yield frozenset(s)


class AllSubsetsEnumerator:
    """Cycles through every nonempty subset in (size, lexicographic) order."""

    def __init__(self, n: int):
        _check_n(n)
        self.n = n
        self.r = 2**n - 1

    def __iter__(self):
        subsets = [frozenset(c) for k in range(1, self.n + 1)
                   for c in itertools.combinations(range(self.n), k)]
        return itertools.cycle(subsets)


class GrowingGaps:
    """Round-robin where the gap between a node's activations grows with time.

    Not r-fair for any r; provided only as an experiment hook.
    """

    def __init__(self, n: int, growth: int = 1):
        _check_n(n)
        self.n, self.growth = n, growth
        self.r = None

    def __iter__(self):
        rnd = 0
        while True:
            rnd += 1
            for i in range(self.n):
                for _ in range(1 + self.growth * rnd // self.n):
                    yield frozenset((i,))


def _check_n(n):
    if n < 1:
        raise ScheduleError("schedule needs at least one node")


def make_schedule(kind: str, n: int, *, r: Optional[int] = None, seed: int = 0,
                  witness: Optional[ScheduleWitness] = None):
    """Build a restartable schedule source by name."""
    if kind == "roundrobin":
        return RoundRobin(n)
    if kind == "randomfair":
        return RandomFair(n, n if r is None else r, seed)
    if kind == "allsubsets":
        return AllSubsetsEnumerator(n)
    if kind == "witness":
        if witness is None:
            raise ScheduleError("witness schedule needs a witness")
        _check_n(n)
        if any(i >= n for s in witness.prefix + witness.cycle for i in s):
            raise ScheduleError("witness mentions a node outside the system")
        return witness
    raise ScheduleError(f"unknown schedule kind {kind!r}")


def schedule_r(source, n: int) -> Optional[int]:
    """Smallest r for which the source is guaranteed r-fair, if known."""
    if isinstance(source, ScheduleWitness):
        if not source.covers(n):
            return None
        r = 1
        while not witness_is_r_fair(source, r, n):
            r += 1
        return r
    return getattr(source, "r", None)


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------


def format_set(s) -> str:
    return ",".join(str(i + 1) for i in sorted(s))


def format_witness(w: ScheduleWitness, initial: Optional[Sequence] = None) -> str:
    lines = []
    if initial is not None:
        lines.append("initial: " + " | ".join(",".join(p) for p in initial))
    lines.extend(format_set(s) for s in w.prefix)
    lines.append("---")
    lines.extend(format_set(s) for s in w.cycle)
    return "\n".join(lines) + "\n"


def parse_witness(text: str, source: str = "<witness>"):
    """Parse the witness format; returns ``(witness, initial_profiles_or_None)``.

    A verdict report is accepted too: everything up to its ``witness:`` line is skipped.
    """
    from .formats import ParseError

    lines = text.splitlines()
    skip = next((j + 1 for j, line in enumerate(lines) if line.strip() == "witness:"), 0)
    if skip:
        text = "\n" * skip + "\n".join(lines[skip:])
    prefix, cycle = [], []
    target = prefix
    initial = None
    seen_sep = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("initial:"):
            body = line[len("initial:"):].strip()
            initial = [tuple(x.strip() for x in p.split(",")) for p in body.split("|")]
            continue
        if line == "---":
            if seen_sep:
                raise ParseError(source, lineno, "second '---' separator")
            seen_sep = True
            target = cycle
            continue
        try:
            nodes = frozenset(int(x) - 1 for x in line.split(","))
        except ValueError:
            raise ParseError(source, lineno, f"bad activation set {line!r}") from None
        if any(i < 0 for i in nodes):
            raise ParseError(source, lineno, "node indices are 1-based")
        target.append(nodes)
    if not seen_sep:
        raise ParseError(source, 0, "missing '---' separator before the cycle")
    if not cycle:
        raise ParseError(source, 0, "empty cycle")
    return ScheduleWitness(tuple(prefix), tuple(cycle)), initial
