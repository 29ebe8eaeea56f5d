"""Interaction systems and their asynchronous dynamics.

Nodes are numbered ``0 .. n-1`` in the Python API.  Text formats and the
command line use 1-based numbering.

An action profile is a tuple of symbols (one per node).  A *window* is the
tuple of the ``k`` most recent profiles, most recent last; it is the input
every reaction function sees.  Distributions over a node's actions are
tuples of ``(symbol, Fraction)`` pairs.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import lcm, prod
from typing import Callable, Iterable, Iterator, Mapping, Optional

Profile = tuple
Window = tuple
Dist = tuple

#: exhaustive table operations refuse beyond this many entries
SIZE_GUARD = 2**24


class SpecError(ValueError):
    """Malformed system description or configuration."""


class SizeGuardError(RuntimeError):
    """An exhaustive operation would exceed ``SIZE_GUARD`` table entries."""


def check_size(entries: int, what: str = "table") -> None:
    if entries > SIZE_GUARD:
        raise SizeGuardError(
            f"{what} needs {entries} entries, above the guard of {SIZE_GUARD}"
        )


def point(symbol: str) -> Dist:
    return ((symbol, Fraction(1)),)


def make_dist(weights: Mapping[str, object]) -> Dist:
    """Normalise a ``{symbol: weight}`` mapping into a canonical distribution.

    Zero weights are dropped; the result is sorted by symbol.
    """
    items = []
    for sym, w in weights.items():
        w = Fraction(w)
        if w < 0:
            raise SpecError(f"negative probability {w} for {sym!r}")
        if w:
            items.append((sym, w))
    items.sort()
    if sum(w for _, w in items) != 1:
        raise SpecError(f"distribution does not sum to 1: {dict(weights)}")
    return tuple(items)


def is_point(dist: Dist) -> bool:
    return len(dist) == 1


# ---------------------------------------------------------------------------
# Named reaction families
# ---------------------------------------------------------------------------
#
# A named reaction is (family, params) with params a tuple of (key, value)
# string pairs; repeated keys are allowed.  Each family maps
# (params, node, alphabets, recall_k) to a callable window -> Dist.


def _param(params, key, default=None):
    for k, v in params:
        if k == key:
            return v
    if default is None:
        raise SpecError(f"missing parameter {key!r}")
    return default


def _params_all(params, key):
    return [v for k, v in params if k == key]


def _fam_constant(params, node, alphabets, k):
    d = point(_param(params, "value"))
    return lambda window: d


def _fam_copy(params, node, alphabets, k):
    src = int(_param(params, "source"))
    if not 0 <= src < len(alphabets):
        raise SpecError(f"copy source {src} out of range")
    return lambda window: point(window[-1][src])


def _fam_majority(params, node, alphabets, k):
    friends = [int(f) for f in _param(params, "friends").split(",")]
    x = _param(params, "x", "X")
    y = _param(params, "y", "Y")
    if not friends:
        raise SpecError(f"node {node} has no friends")
    px, py = point(x), point(y)

    def react(window):
        cur = window[-1]
        n_x = sum(1 for f in friends if cur[f] == x)
        return px if 2 * n_x >= len(friends) else py

    return react


def _fam_others_pattern(params, node, alphabets, k):
    """Output depends on the ordered tuple of the other nodes' current actions."""
    default = point(_param(params, "default"))
    rules = {}
    for rule in _params_all(params, "on"):
        lhs, _, out = rule.rpartition(":")
        rules[tuple(lhs.split(","))] = point(out)

    def react(window):
        cur = window[-1]
        others = cur[:node] + cur[node + 1:]
        return rules.get(others, default)

    return react


NAMED_FAMILIES: dict[str, Callable] = {
    "constant": _fam_constant,
    "copy": _fam_copy,
    "majority": _fam_majority,
    "others_pattern": _fam_others_pattern,
}


@lru_cache(maxsize=4096)
def _named_callable(family, params, node, alphabets, k):
    try:
        factory = NAMED_FAMILIES[family]
    except KeyError:
        raise SpecError(f"unknown reaction family {family!r}") from None
    return factory(params, node, alphabets, k)


# ---------------------------------------------------------------------------
# Reaction functions and systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReactionFn:
    """One node's reaction function.

    ``kind == "table"``: ``table`` maps every window to a distribution and
    ``overrides`` optionally replaces entries at specific time steps (a
    non-stationary function that is stationary outside those steps).

    ``kind == "named"``: a builtin family from ``NAMED_FAMILIES``.
    """

    kind: str
    table: Optional[Mapping] = None
    overrides: Mapping = field(default_factory=dict)
    family: str = ""
    params: tuple = ()

    @classmethod
    def from_table(cls, table: Mapping, overrides: Optional[Mapping] = None) -> "ReactionFn":
        return cls("table", dict(table), dict(overrides or {}))

    @classmethod
    def named(cls, family: str, **params) -> "ReactionFn":
        items = []
        for key, value in params.items():
            if isinstance(value, (list, tuple)) and key == "on":
                items.extend(("on", str(v)) for v in value)
            elif isinstance(value, (list, tuple)):
                items.append((key, ",".join(str(v) for v in value)))
            else:
                items.append((key, str(value)))
        return cls("named", family=family, params=tuple(items))

    def __call__(self, spec: "SystemSpec", node: int, window: Window, t: int) -> Dist:
        if self.kind == "table":
            over = self.overrides.get(t)
            if over is not None and window in over:
                return over[window]
            return self.table[window]
        fn = _named_callable(self.family, self.params, node, spec.alphabets, spec.recall_k)
        return fn(window)


@dataclass(frozen=True)
class Flags:
    deterministic: bool = True
    self_independent: bool = False
    stationary: bool = True
    historyless: bool = True

    def as_dict(self) -> dict:
        return {
            "deterministic": self.deterministic,
            "self_independent": self.self_independent,
            "stationary": self.stationary,
            "historyless": self.historyless,
        }


@dataclass(frozen=True)
class SystemSpec:
    """An interaction system: alphabets, recall depth and reaction functions.

    ``flags`` are the *declared* restrictions; ``verify_flags`` checks them
    against the reactions.  ``origin`` records the generator stanza a spec
    was built from, so the file format can reproduce it compactly.
    """

    alphabets: tuple
    reactions: tuple
    recall_k: int = 1
    window_w: Optional[int] = None
    flags: Flags = Flags()
    names: tuple = ()
    origin: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "alphabets", tuple(tuple(a) for a in self.alphabets))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        if self.window_w is None:
            object.__setattr__(self, "window_w", self.recall_k)
        n = len(self.alphabets)
        if n < 1:
            raise SpecError("a system needs at least one node")
        if len(self.reactions) != n:
            raise SpecError(f"{n} alphabets but {len(self.reactions)} reaction functions")
        for i, alpha in enumerate(self.alphabets):
            if not alpha:
                raise SpecError(f"node {i} has an empty alphabet")
            if len(set(alpha)) != len(alpha):
                raise SpecError(f"node {i} has duplicate symbols")
        if self.recall_k < 1:
            raise SpecError("recall_k must be at least 1")
        if self.window_w < self.recall_k:
            raise SpecError("window_w must be at least recall_k")
        if self.flags.historyless and (self.recall_k != 1 or not self.flags.stationary):
            raise SpecError("historyless requires recall_k == 1 and stationary")
        if self.names and len(self.names) != n:
            raise SpecError("names must have one entry per node")
        for i, fn in enumerate(self.reactions):
            if fn.kind == "table":
                self._check_table(i, fn.table, total=True)
                for t, over in fn.overrides.items():
                    self._check_table(i, over, total=False)
            elif fn.kind != "named":
                raise SpecError(f"unknown reaction kind {fn.kind!r}")

    def _check_table(self, i, table, total):
        if total:
            check_size(self.num_windows, "reaction table")
            if len(table) != self.num_windows:
                raise SpecError(
                    f"node {i}: table has {len(table)} entries, expected {self.num_windows}"
                )
        own = set(self.alphabets[i])
        for window, dist in table.items():
            if len(window) != self.recall_k:
                raise SpecError(f"node {i}: window {window!r} has wrong length")
            for prof in window:
                self.check_profile(prof)
            if sum(w for _, w in dist) != 1:
                raise SpecError(f"node {i}: distribution at {window!r} does not sum to 1")
            for sym, w in dist:
                if sym not in own:
                    raise SpecError(f"node {i}: output {sym!r} not in its alphabet")
                if w <= 0:
                    raise SpecError(f"node {i}: non-positive weight at {window!r}")

    @property
    def n(self) -> int:
        return len(self.alphabets)

    @property
    def num_profiles(self) -> int:
        return prod(len(a) for a in self.alphabets)

    @property
    def num_windows(self) -> int:
        return self.num_profiles**self.recall_k

    def node_name(self, i: int) -> str:
        return self.names[i] if self.names else str(i + 1)

    def check_profile(self, prof) -> None:
        if len(prof) != self.n:
            raise SpecError(f"profile {prof!r} has arity {len(prof)}, expected {self.n}")
        for i, sym in enumerate(prof):
            if sym not in self.alphabets[i]:
                raise SpecError(f"symbol {sym!r} not in alphabet of node {i}")

    def react(self, node: int, window: Window, t: int) -> Dist:
        return self.reactions[node](self, node, window, t)

    def profiles(self) -> Iterator[Profile]:
        return itertools.product(*self.alphabets)

    def windows(self) -> Iterator[Window]:
        return itertools.product(list(self.profiles()), repeat=self.recall_k)

    def initial(self, *profiles) -> "Configuration":
        """Configuration from the given profiles (oldest first).

        A single profile is repeated to fill the recall window.
        """
        profs = [tuple(p) for p in profiles]
        if len(profs) == 1:
            profs = profs * self.recall_k
        if len(profs) < self.recall_k:
            raise SpecError(f"need {self.recall_k} profiles, got {len(profs)}")
        window = tuple(profs[-self.recall_k:])
        cfg = Configuration(window, max(len(profs), self.window_w))
        self.check_config(cfg)
        return cfg

    def check_config(self, cfg: "Configuration") -> None:
        if len(cfg.window) != self.recall_k:
            raise SpecError(
                f"configuration window has length {len(cfg.window)}, expected {self.recall_k}"
            )
        for prof in cfg.window:
            self.check_profile(prof)


def historyless_spec(alphabets, funcs, flags: Optional[Flags] = None, **kw) -> SystemSpec:
    """Tabulate deterministic historyless reactions given as ``profile -> symbol``."""
    alphabets = tuple(tuple(a) for a in alphabets)
    profiles = list(itertools.product(*alphabets))
    check_size(len(profiles) * len(alphabets))
    reactions = []
    for fn in funcs:
        reactions.append(ReactionFn.from_table({(p,): point(fn(p)) for p in profiles}))
    return SystemSpec(alphabets, tuple(reactions), 1, 1, flags or Flags(), **kw)


def tabulate(spec: SystemSpec) -> SystemSpec:
    """Return an equivalent spec whose reactions are all explicit tables."""
    check_size(spec.num_windows * spec.n)
    windows = list(spec.windows())
    reactions = []
    for i, fn in enumerate(spec.reactions):
        if fn.kind == "table":
            reactions.append(fn)
        else:
            reactions.append(ReactionFn.from_table({w: spec.react(i, w, spec.window_w + 1) for w in windows}))
    return SystemSpec(spec.alphabets, tuple(reactions), spec.recall_k, spec.window_w,
                      spec.flags, spec.names)


# ---------------------------------------------------------------------------
# Dynamics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Configuration:
    """State of the dynamics: last ``k`` profiles and the time counter."""

    window: tuple
    t: int

    @property
    def profile(self) -> Profile:
        return self.window[-1]


@dataclass(frozen=True)
class Trace:
    initial: Configuration
    steps: tuple  # of (frozenset active, profile)
    rng_seed: Optional[int] = None

    @property
    def profiles(self) -> list:
        return [p for _, p in self.steps]

    def final(self, k: int) -> Configuration:
        window = tuple((list(self.initial.window) + self.profiles)[-k:])
        return Configuration(window, self.initial.t + len(self.steps))


def sample(dist: Dist, rng: Optional[random.Random]):
    """Draw from a rational distribution exactly (integer draw over the common denominator)."""
    if len(dist) == 1:
        return dist[0][0]
    if rng is None:
        raise SpecError("randomized reaction needs a seeded generator")
    denom = lcm(*(w.denominator for _, w in dist))
    u = rng.randrange(denom)
    acc = 0
    for sym, w in dist:
        acc += w.numerator * (denom // w.denominator)
        if u < acc:
            return sym
    raise AssertionError("unreachable: weights sum to 1")


def apply_activation(spec: SystemSpec, cfg: Configuration, active: Iterable[int],
                     rng: Optional[random.Random] = None) -> Configuration:
    """One time step: every node in ``active`` reacts to the pre-step window."""
    active = frozenset(active)
    if not active:
        raise SpecError("activation set must be nonempty")
    if not all(0 <= i < spec.n for i in active):
        raise SpecError(f"activation set {sorted(active)} has nodes outside 0..{spec.n - 1}")
    spec.check_config(cfg)
    t = cfg.t + 1
    new = list(cfg.profile)
    # nodes in ascending order so seeded draws are reproducible
    for i in sorted(active):
        new[i] = sample(spec.react(i, cfg.window, t), rng)
    return Configuration(cfg.window[1:] + (tuple(new),), t)


def run_dynamics(spec: SystemSpec, initial: Configuration, schedule, horizon: int,
                 seed: Optional[int] = None) -> Trace:
    """Execute ``horizon`` steps of the (initial, schedule)-dynamics."""
    if horizon < 1:
        raise SpecError("horizon must be at least 1")
    rng = random.Random(seed) if seed is not None else random.Random(0)
    it = iter(schedule)
    cfg = initial
    steps = []
    for step in range(horizon):
        try:
            active = frozenset(next(it))
        except StopIteration:
            raise SpecError(f"schedule exhausted after {step} of {horizon} steps") from None
        cfg = apply_activation(spec, cfg, active, rng)
        steps.append((active, cfg.profile))
    deterministic = all(fn.kind == "table" for fn in spec.reactions) and spec.flags.deterministic
    return Trace(initial, tuple(steps), None if deterministic and seed is None else seed)


def is_stable_profile(spec: SystemSpec, a: Profile, t: Optional[int] = None) -> bool:
    """True iff holding ``a`` forever is a fixed point for every node (and every future t)."""
    window = (tuple(a),) * spec.recall_k
    times = [spec.window_w + 1 if t is None else t]
    for fn in spec.reactions:
        if fn.kind == "table":
            times.extend(s for s in fn.overrides if s >= times[0])
    for s in set(times):
        for i in range(spec.n):
            if spec.react(i, window, s) != point(a[i]):
                return False
    return True


def detect_stabilization(trace: Trace, spec: SystemSpec) -> Optional[Profile]:
    """The stable profile the trace has settled in, or None.

    Conclusive only: the whole recall window must hold the same profile and
    that profile must be a fixed point of every reaction function.
    """
    if not trace.steps:
        raise SpecError("empty trace")
    final = trace.final(spec.recall_k)
    a = final.profile
    if any(p != a for p in final.window):
        return None
    return a if is_stable_profile(spec, a, final.t + 1) else None


# ---------------------------------------------------------------------------
# Flag verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlagCheck:
    holds: bool
    counterexample: Optional[tuple] = None


def _blank_own(window, i):
    return tuple(p[:i] + (None,) + p[i + 1:] for p in window)


def _node_tables(spec: SystemSpec, i: int):
    """(time-or-None, table) pairs for node i, tabulating named reactions."""
    fn = spec.reactions[i]
    if fn.kind == "table":
        yield None, fn.table
        for t, over in sorted(fn.overrides.items()):
            full = dict(fn.table)
            full.update(over)
            yield t, full
    else:
        yield None, {w: spec.react(i, w, spec.window_w + 1) for w in spec.windows()}


def verify_flags(spec: SystemSpec) -> dict:
    """Check each restriction against the reaction functions.

    Returns ``{flag: FlagCheck}``.  Self-independence is checked by grouping
    windows that agree on every coordinate except the owner's: every group
    must map to a single distribution.
    """
    check_size(spec.num_windows * spec.n, "flag verification")
    det = FlagCheck(True)
    selfind = FlagCheck(True)
    stat = FlagCheck(True)
    for i in range(spec.n):
        base = None
        for t, table in _node_tables(spec, i):
            if base is None:
                base = table
            elif stat.holds:
                for w, d in table.items():
                    if base[w] != d:
                        stat = FlagCheck(False, (i, t, w))
                        break
            seen = {}
            for w, d in table.items():
                if det.holds and len(d) != 1:
                    det = FlagCheck(False, (i, t, w))
                if selfind.holds:
                    key = _blank_own(w, i)
                    prev = seen.setdefault(key, (w, d))
                    if prev[1] != d:
                        selfind = FlagCheck(False, (i, t, prev[0], w))
    hless = FlagCheck(True) if spec.recall_k == 1 and stat.holds else FlagCheck(
        False, ("recall_k", spec.recall_k) if spec.recall_k != 1 else stat.counterexample)
    return {
        "deterministic": det,
        "self_independent": selfind,
        "stationary": stat,
        "historyless": hless,
    }


def certified_flags(spec: SystemSpec) -> Flags:
    report = verify_flags(spec)
    return Flags(**{k: v.holds for k, v in report.items()})


def check_declared_flags(spec: SystemSpec) -> None:
    """Raise if a declared flag is contradicted by the reactions."""
    report = verify_flags(spec)
    for name, declared in spec.flags.as_dict().items():
        if declared and not report[name].holds:
            raise SpecError(f"declared {name} but counterexample {report[name].counterexample}")
