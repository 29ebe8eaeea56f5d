"""Exhaustive analysis of small deterministic systems.

Every decision procedure works on a compiled form of the system: a
configuration (the last ``k`` profiles) is a single integer and each
configuration knows, per node, the action that node would take if
activated.  A configuration's successor under activation set ``S`` only
depends on ``S & D`` where ``D`` is the set of nodes whose reaction differs
from their current action, so edges are enumerated per submask of ``D``
rather than per subset of all nodes.
"""
from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .core import (
    Configuration,
    SizeGuardError,
    SpecError,
    SystemSpec,
    apply_activation,
    check_size,
    verify_flags,
)
from .schedules import ScheduleWitness, format_witness


class HypothesisError(SpecError):
    """The input does not satisfy the preconditions of an operation."""


class SynthesisAnomaly(RuntimeError):
    """Oscillation search failed on an input that satisfies its hypotheses."""


CONVERGENT = "Convergent"
NON_CONVERGENT = "NonConvergent"


def popcount(x: int) -> int:
    return bin(x).count("1")


def bits(mask: int):
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1


def mask_of(nodes) -> int:
    m = 0
    for i in nodes:
        m |= 1 << i
    return m


def submasks(mask: int):
    """All submasks of ``mask``, largest first, ending with 0."""
    s = mask
    while True:
        yield s
        if s == 0:
            return
        s = (s - 1) & mask


# ---------------------------------------------------------------------------
# compiled systems
# ---------------------------------------------------------------------------


class Compiled:
    """Integer encoding of a deterministic stationary bounded-recall system."""

    def __init__(self, spec: SystemSpec):
        for fn in spec.reactions:
            if fn.kind == "table" and fn.overrides:
                raise HypothesisError("analysis needs stationary reaction functions")
        self.spec = spec
        self.n = n = spec.n
        self.k = k = spec.recall_k
        self.sizes = [len(a) for a in spec.alphabets]
        self.index = [{s: j for j, s in enumerate(a)} for a in spec.alphabets]
        self.weights = []
        w = 1
        for size in self.sizes:
            self.weights.append(w)
            w *= size
        self.P = P = w
        self.nconf = P**k
        check_size(self.nconf * n, "configuration space")
        self.full = (1 << n) - 1

        # profile index: node i is digit i with weight weights[i]
        self._prof = [self._lookup(p) for p in range(P)]
        t = spec.window_w + 1
        self.delta = []
        self.dmask = []
        for c in range(self.nconf):
            window = self.window_of(c)
            cur = window[-1]
            row = []
            dm = 0
            for i in range(n):
                dist = spec.react(i, window, t)
                if len(dist) != 1:
                    raise HypothesisError("analysis needs deterministic reaction functions")
                d = (self.index[i][dist[0][0]] - self.index[i][cur[i]]) * self.weights[i]
                row.append(d)
                if d:
                    dm |= 1 << i
            self.delta.append(row)
            self.dmask.append(dm)
        self._succ_cache = {}

    # encoding helpers -----------------------------------------------------

    def profile_index(self, prof) -> int:
        return sum(self.index[i][s] * self.weights[i] for i, s in enumerate(prof))

    def _lookup(self, p):
        return tuple(self.spec.alphabets[i][(p // self.weights[i]) % self.sizes[i]]
                     for i in range(self.n))

    def window_of(self, c: int) -> tuple:
        digits = []
        for _ in range(self.k):
            digits.append(c % self.P)
            c //= self.P
        return tuple(self._prof[d] for d in reversed(digits))

    def config_index(self, cfg: Configuration) -> int:
        c = 0
        for prof in cfg.window:
            c = c * self.P + self.profile_index(prof)
        return c

    def configuration(self, c: int) -> Configuration:
        return Configuration(self.window_of(c), self.spec.window_w)

    def is_fixed(self, c: int) -> bool:
        """Constant window whose profile no node wants to change."""
        if self.dmask[c]:
            return False
        p = c % self.P
        return all(d == p for d in self._digits(c))

    def _digits(self, c):
        for _ in range(self.k):
            yield c % self.P
            c //= self.P

    def succ(self, c: int, T: int) -> int:
        p = c % self.P
        row = self.delta[c]
        for i in bits(T):
            p += row[i]
        if self.k == 1:
            return p
        return (c % (self.P ** (self.k - 1))) * self.P + p

    def moves(self, c: int):
        """``(T, successor)`` for every submask ``T`` of the differing set."""
        got = self._succ_cache.get(c)
        if got is None:
            got = [(T, self.succ(c, T)) for T in submasks(self.dmask[c])]
            self._succ_cache[c] = got
        return got

    def fixed_configs(self) -> list:
        if self.k == 1:
            return [c for c in range(self.nconf) if not self.dmask[c]]
        step = sum(self.P**j for j in range(self.k))
        return [p * step for p in range(self.P) if not self.dmask[p * step]]


def compile_spec(spec: SystemSpec) -> Compiled:
    return Compiled(spec)


def _covered_by(D: int, T: int, full: int, cap: int) -> int:
    """Union of the activation sets ``S`` with ``S & D == T`` and ``|S| <= cap``."""
    t = popcount(T)
    if t > cap:
        return 0
    free = full & ~D
    if t < cap:
        return T | free
    return T


def _label_for(D: int, T: int, full: int, cap: int, want: int = 0) -> int:
    """A concrete activation set realising edge ``T``, containing ``want`` if possible.

    Uncapped this is the maximal set ``T | ~D``.
    """
    free = full & ~D
    room = cap - popcount(T)
    if popcount(free) <= room:
        return T | free
    extra = want & free
    for i in bits(free):
        if popcount(extra) >= room:
            break
        extra |= 1 << i
    S = T | extra
    if S == 0:
        raise AssertionError("edge without a realising set")
    return S


# ---------------------------------------------------------------------------
# graph utilities
# ---------------------------------------------------------------------------


def tarjan_scc(num: int, adj) -> list:
    """Strongly connected components of ``0..num-1``, sinks first.

    ``adj[v]`` is an iterable of successor ids.  Iterative, so deep graphs
    do not hit the recursion limit.
    """
    index = [-1] * num
    low = [0] * num
    on_stack = [False] * num
    stack = []
    comps = []
    counter = 0
    for root in range(num):
        if index[root] != -1:
            continue
        work = [(root, iter(adj[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(adj[w])))
                    advanced = True
                    break
                if on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def _bfs_path(start, goal_fn, edges_fn, allowed=None):
    """Shortest list of ``(label, vertex)`` steps from ``start`` to a goal vertex."""
    parent = {start: None}
    q = deque([start])
    while q:
        v = q.popleft()
        if v != start and goal_fn(v):
            path = []
            while parent[v] is not None:
                u, label = parent[v]
                path.append((label, v))
                v = u
            path.reverse()
            return path
        for label, w in edges_fn(v):
            if allowed is not None and w not in allowed:
                continue
            if w not in parent:
                parent[w] = (v, label)
                q.append(w)
            elif goal_fn(w) and w == start and v != start:
                pass
    return None


def _path_to(start, goal, edges_fn, allowed):
    if start == goal:
        return []
    return _bfs_path(start, lambda v: v == goal, edges_fn, allowed)


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------


@dataclass
class Verdict:
    result: str
    initial: Optional[Configuration] = None
    witness: Optional[ScheduleWitness] = None
    r: Optional[int] = None
    activation_cap: Optional[int] = None
    n: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def convergent(self) -> bool:
        return self.result == CONVERGENT

    @property
    def note(self) -> str:
        if self.convergent and self.activation_cap is not None and self.activation_cap < self.n:
            return f"convergent under <={self.activation_cap}-simultaneity only"
        return ""

    def to_text(self) -> str:
        lines = [f"result: {self.result}"]
        if self.r is not None:
            lines.append(f"r: {self.r}")
        if self.activation_cap is not None and self.activation_cap < self.n:
            lines.append(f"activation-cap: {self.activation_cap}")
        if self.note:
            lines.append(f"note: {self.note}")
        for key in sorted(self.stats):
            lines.append(f"{key}: {self.stats[key]}")
        if self.witness is not None:
            lines.append("witness:")
            lines.append(format_witness(self.witness, self.initial.window).rstrip("\n"))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        out = {"result": self.result, "stats": self.stats}
        if self.r is not None:
            out["r"] = self.r
        if self.activation_cap is not None and self.activation_cap < self.n:
            out["activation_cap"] = self.activation_cap
        if self.note:
            out["note"] = self.note
        if self.witness is not None:
            out["initial"] = [list(p) for p in self.initial.window]
            out["prefix"] = [sorted(i + 1 for i in s) for s in self.witness.prefix]
            out["cycle"] = [sorted(i + 1 for i in s) for s in self.witness.cycle]
        return json.dumps(out, sort_keys=True)


def _sets(masks) -> tuple:
    return tuple(frozenset(bits(m)) for m in masks)


def _cap(spec, activation_cap):
    if activation_cap is None:
        return spec.n
    if activation_cap < 1:
        raise SpecError("activation cap must be at least 1")
    return min(activation_cap, spec.n)


# ---------------------------------------------------------------------------
# stable states and the configuration graph
# ---------------------------------------------------------------------------


def enumerate_stable_states(spec: SystemSpec) -> set:
    """All fixed points of the joint reaction map of a historyless system."""
    if spec.recall_k != 1:
        raise HypothesisError("stable-state enumeration needs a historyless system; "
                              "use stable_profiles for bounded recall")
    comp = compile_spec(spec)
    return {comp.window_of(c)[-1] for c in comp.fixed_configs()}


def stable_profiles(spec: SystemSpec) -> set:
    """Profiles whose constant window is a fixed point (any recall depth)."""
    comp = compile_spec(spec)
    return {comp.window_of(c)[-1] for c in comp.fixed_configs()}


@dataclass
class ConfigurationGraph:
    vertices: list
    edges: list  # (cfg index, activation set mask, successor index)
    activation_cap: int
    compiled: Compiled

    def configuration(self, v: int) -> Configuration:
        return self.compiled.configuration(v)


def build_configuration_graph(spec: SystemSpec, activation_cap: Optional[int] = None) -> ConfigurationGraph:
    """Explicit labelled transition system over every activation set up to the cap."""
    comp = compile_spec(spec)
    cap = _cap(spec, activation_cap)
    subsets = [mask_of(c) for size in range(1, cap + 1)
               for c in itertools.combinations(range(spec.n), size)]
    check_size(comp.nconf * len(subsets), "configuration graph")
    edges = []
    for c in range(comp.nconf):
        D = comp.dmask[c]
        for S in subsets:
            edges.append((c, S, comp.succ(c, S & D)))
    return ConfigurationGraph(list(range(comp.nconf)), edges, cap, comp)


# ---------------------------------------------------------------------------
# convergence under fair schedules
# ---------------------------------------------------------------------------


def decide_convergent(spec: SystemSpec, activation_cap: Optional[int] = None) -> Verdict:
    """Convergent iff no strongly connected set of >= 2 configurations has
    internal edges whose activation sets jointly cover every node.

    Such a component contains a closed walk through all of those edges,
    which repeated forever is a fair schedule that never settles.
    """
    comp = compile_spec(spec)
    cap = _cap(spec, activation_cap)
    n, full = comp.n, comp.full
    adj = []
    n_edges = 0
    for c in range(comp.nconf):
        D = comp.dmask[c]
        outs = []
        for T, c2 in comp.moves(c):
            if popcount(T) > cap or (T == 0 and D == full):
                continue
            outs.append(c2)
        n_edges += len(outs)
        adj.append(outs)
    comps = tarjan_scc(comp.nconf, adj)
    stats = {"vertices": comp.nconf, "edges": n_edges, "components": len(comps)}
    for members in comps:
        if len(members) < 2:
            continue
        inside = set(members)
        covered = 0
        for c in members:
            D = comp.dmask[c]
            for T, c2 in comp.moves(c):
                if c2 in inside:
                    covered |= _covered_by(D, T, full, cap)
        if covered == full:
            initial, witness = _fair_witness(comp, members, cap)
            return Verdict(NON_CONVERGENT, initial, witness, None, cap, n, stats)
    return Verdict(CONVERGENT, None, None, None, cap, n, stats)


def _fair_witness(comp: Compiled, members, cap):
    """Closed walk inside one component covering every node and >= 2 configurations."""
    full = comp.full
    inside = set(members)
    start = min(members)

    def edges_fn(v):
        D = comp.dmask[v]
        for T, w in comp.moves(v):
            if w in inside and popcount(T) <= cap and (T or D != full):
                yield _label_for(D, T, full, cap), w

    walk = []  # activation masks
    cur = start
    covered = 0
    visited = {start}
    for i in range(comp.n):
        if covered >> i & 1:
            continue
        # an edge in the component whose label can include node i
        best = None
        for u in sorted(inside):
            D = comp.dmask[u]
            for T, w in comp.moves(u):
                if w in inside and (_covered_by(D, T, full, cap) >> i) & 1:
                    best = (u, T, w)
                    break
            if best:
                break
        u, T, w = best
        for label, v in _path_to(cur, u, edges_fn, inside):
            walk.append(label)
            covered |= label
            visited.add(v)
        label = _label_for(comp.dmask[u], T, full, cap, want=1 << i)
        walk.append(label)
        covered |= label
        visited.add(w)
        cur = w
    if len(visited) < 2:
        other = min(v for v in inside if v != start)
        for label, v in _path_to(cur, other, edges_fn, inside):
            walk.append(label)
            visited.add(v)
        cur = other
    for label, v in _path_to(cur, start, edges_fn, inside) or []:
        walk.append(label)
    return comp.configuration(start), ScheduleWitness((), _sets(walk))


# ---------------------------------------------------------------------------
# convergence under r-fair schedules
# ---------------------------------------------------------------------------


def _r_moves(comp, c, counters, r, cap):
    """Dominant activation sets from product state ``(c, counters)``.

    Nodes idle for ``r - 1`` steps must be activated.  Among sets that
    differ only in non-changing nodes, a superset leaves every idle counter
    no larger, so only maximal ones are generated.
    """
    full = comp.full
    D = comp.dmask[c]
    forced = 0
    for i, v in enumerate(counters):
        if v == r - 1:
            forced |= 1 << i
    must = forced & D
    free = full & ~D
    forced_free = forced & free
    for T0 in submasks(D & ~must):
        T = T0 | must
        room = cap - popcount(T)
        if room < 0 or popcount(forced_free) > room:
            continue
        if popcount(free) <= room:
            ys = [free]
        else:
            pool = list(bits(free & ~forced_free))
            need = room - popcount(forced_free)
            ys = [forced_free | mask_of(extra) for extra in itertools.combinations(pool, need)]
        for Y in ys:
            S = T | Y
            if S:
                yield S, T


def decide_r_convergent(spec: SystemSpec, r: int, activation_cap: Optional[int] = None) -> Verdict:
    """Search the product of configurations with per-node idle counters.

    A run is r-fair iff no counter reaches ``r``, so every infinite path of
    the product from a zero-counter start is an r-fair run.  The system is
    not r-convergent iff some reachable component contains two distinct
    configurations.
    """
    if r < 1:
        raise SpecError("r must be at least 1")
    comp = compile_spec(spec)
    cap = _cap(spec, activation_cap)
    n = comp.n
    ids = {}
    states = []
    adj = []
    labels = []
    zero = (0,) * n
    for c in range(comp.nconf):
        ids[(c, zero)] = len(states)
        states.append((c, zero))
    q = deque(range(len(states)))
    n_edges = 0
    while q:
        v = q.popleft()
        c, counters = states[v]
        outs = []
        outl = []
        for S, T in _r_moves(comp, c, counters, r, cap):
            c2 = comp.succ(c, T)
            nxt = tuple(0 if S >> i & 1 else counters[i] + 1 for i in range(n))
            key = (c2, nxt)
            w = ids.get(key)
            if w is None:
                w = len(states)
                ids[key] = w
                states.append(key)
                q.append(w)
            outs.append(w)
            outl.append(S)
        while len(adj) <= v:
            adj.append(None)
            labels.append(None)
        adj[v] = outs
        labels[v] = outl
        n_edges += len(outs)
        check_size(len(states) * n, "r-fair product space")
    comps = tarjan_scc(len(states), adj)
    stats = {"vertices": comp.nconf, "product-states": len(states), "edges": n_edges}
    for members in comps:
        if len(members) < 2:
            continue
        configs = {states[v][0] for v in members}
        if len(configs) < 2:
            continue
        initial, witness = _r_witness(comp, states, adj, labels, members)
        return Verdict(NON_CONVERGENT, initial, witness, r, cap, n, stats)
    return Verdict(CONVERGENT, None, None, r, cap, n, stats)


def _r_witness(comp, states, adj, labels, members):
    inside = set(members)

    def edges_fn(v):
        return zip(labels[v], adj[v])

    # multi-source BFS from the zero-counter roots into the component
    roots = range(comp.nconf)
    parent = {v: None for v in roots}
    q = deque(roots)
    target = None
    while q:
        v = q.popleft()
        if v in inside:
            target = v
            break
        for label, w in edges_fn(v):
            if w not in parent:
                parent[w] = (v, label)
                q.append(w)
    prefix = []
    v = target
    while parent[v] is not None:
        u, label = parent[v]
        prefix.append(label)
        v = u
    prefix.reverse()
    root = v
    c0 = states[target][0]
    out = _bfs_path(target, lambda v: states[v][0] != c0, edges_fn, inside)
    mid = out[-1][1]
    back = _path_to(mid, target, edges_fn, inside)
    cycle = [label for label, _ in out] + [label for label, _ in back]
    return comp.configuration(states[root][0]), ScheduleWitness(_sets(prefix), _sets(cycle))


# ---------------------------------------------------------------------------
# stable coloring
# ---------------------------------------------------------------------------


@dataclass
class StableColoring:
    """Each configuration's set of reachable stable profiles (as bitmasks over ``stable``)."""

    compiled: Compiled
    stable: list  # stable profiles, indexed by color bit
    masks: list  # per configuration index

    def color(self, cfg) -> frozenset:
        if not isinstance(cfg, Configuration):
            cfg = self.compiled.spec.initial(cfg)
        m = self.masks[self.compiled.config_index(cfg)]
        return frozenset(self.stable[i] for i in bits(m))

    def polychromatic(self) -> list:
        return [c for c, m in enumerate(self.masks) if m & (m - 1)]


def stable_coloring(spec: SystemSpec, compiled: Optional[Compiled] = None) -> StableColoring:
    comp = compiled or compile_spec(spec)
    fixed = comp.fixed_configs()
    own = [0] * comp.nconf
    for b, c in enumerate(fixed):
        own[c] = 1 << b
    adj = [[c2 for _, c2 in comp.moves(c)] for c in range(comp.nconf)]
    masks = [0] * comp.nconf
    for members in tarjan_scc(comp.nconf, adj):
        m = 0
        for c in members:
            m |= own[c]
            for c2 in adj[c]:
                m |= masks[c2]
        for c in members:
            masks[c] = m
    stable = [comp.window_of(c)[-1] for c in fixed]
    return StableColoring(comp, stable, masks)


def count_good_initial_states(spec: SystemSpec, targets: Optional[Iterable] = None) -> int:
    """Initial configurations from which some stable state is reachable.

    With ``targets`` only those stable profiles count.
    """
    coloring = stable_coloring(spec)
    if targets is None:
        want = (1 << len(coloring.stable)) - 1
    else:
        targets = {tuple(p) for p in targets}
        unknown = targets - set(coloring.stable)
        if unknown:
            raise SpecError(f"not stable profiles: {sorted(unknown)}")
        want = sum(1 << b for b, p in enumerate(coloring.stable) if p in targets)
    return sum(1 for m in coloring.masks if m & want)


# ---------------------------------------------------------------------------
# oscillation synthesis
# ---------------------------------------------------------------------------


def check_oscillation_hypotheses(spec: SystemSpec, compiled: Optional[Compiled] = None) -> Compiled:
    report = verify_flags(spec)
    for flag in ("deterministic", "stationary", "self_independent"):
        if not report[flag].holds:
            raise HypothesisError(f"hypothesis not met: {flag} fails at {report[flag].counterexample}")
    comp = compiled or compile_spec(spec)
    if len(comp.fixed_configs()) < 2:
        raise HypothesisError("hypothesis not met: fewer than two stable states")
    return comp


def synthesize_oscillation(spec: SystemSpec, activation_cap: Optional[int] = None):
    """Fair witness whose run stays among polychromatic configurations.

    Starting from the smallest polychromatic configuration, repeatedly
    append the shortest activation sequence that covers every node and
    ends polychromatic, never leaving the polychromatic set.  When an
    endpoint repeats, the segments since its first occurrence form the
    cycle.
    """
    comp = check_oscillation_hypotheses(spec)
    cap = _cap(spec, activation_cap)
    coloring = stable_coloring(spec, comp)
    poly = set(coloring.polychromatic())
    if not poly:
        raise SynthesisAnomaly("no polychromatic configuration despite the hypotheses holding")
    full = comp.full

    def ext_edges(state):
        c, m = state
        D = comp.dmask[c]
        out = []
        for T, c2 in comp.moves(c):
            if c2 not in poly or popcount(T) > cap or (T == 0 and D == full):
                continue
            S = _label_for(D, T, full, cap)
            out.append((sorted(bits(S)), S, c2))
        out.sort()
        for _, S, c2 in out:
            yield S, (c2, m | S)

    start = min(poly)
    endpoints = [start]
    segments = []
    seen = {start: 0}
    while True:
        path = _bfs_path((endpoints[-1], 0), lambda s: s[1] == full, ext_edges)
        if path is None:
            raise SynthesisAnomaly(
                f"no fair extension stays polychromatic from configuration {endpoints[-1]}")
        segments.append([label for label, _ in path])
        end = path[-1][1][0]
        if end in seen:
            j = seen[end]
            prefix = [s for seg in segments[:j] for s in seg]
            cycle = [s for seg in segments[j:] for s in seg]
            return comp.configuration(start), ScheduleWitness(_sets(prefix), _sets(cycle))
        seen[end] = len(segments)
        endpoints.append(end)


# ---------------------------------------------------------------------------
# witness certification
# ---------------------------------------------------------------------------


def verify_witness(spec: SystemSpec, initial: Configuration, w: ScheduleWitness,
                   max_passes: Optional[int] = None) -> bool:
    """Replay the witness with the reference step function.

    The configuration at the start of each pass through the cycle is
    recorded until one repeats; from there the run is periodic.  The
    witness certifies non-convergence iff the cycle covers every node and
    that periodic part visits at least two configurations.
    """
    try:
        if not w.covers(spec.n):
            return False
        cfg = initial
        spec.check_config(cfg)
        for s in w.prefix:
            cfg = apply_activation(spec, cfg, s)
        if max_passes is None:
            max_passes = spec.num_windows + 1
        starts = {}
        passes = []
        for k in range(max_passes + 1):
            key = cfg.window
            if key in starts:
                periodic = passes[starts[key]:]
                distinct = set()
                for visited in periodic:
                    distinct.update(visited)
                return len(distinct) >= 2
            starts[key] = k
            visited = [cfg.window]
            for s in w.cycle:
                cfg = apply_activation(spec, cfg, s)
                visited.append(cfg.window)
            passes.append(visited)
        return False
    except (SpecError, KeyError):
        return False
