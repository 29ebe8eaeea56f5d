"""Encodings of games, circuits, social networks, routing and congestion as systems."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

from .core import Flags, ReactionFn, SpecError, SystemSpec, check_size, historyless_spec

# ---------------------------------------------------------------------------
# normal-form games
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalFormGame:
    """``payoffs`` maps each pure profile to a tuple of per-player utilities."""

    strategies: tuple
    payoffs: dict

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(tuple(s) for s in self.strategies))
        payoffs = {tuple(k): tuple(Fraction(u) for u in v) for k, v in self.payoffs.items()}
        object.__setattr__(self, "payoffs", payoffs)
        for s in self.strategies:
            if not s or len(set(s)) != len(s):
                raise SpecError("strategy sets must be nonempty and duplicate-free")
        for prof in self.profiles():
            u = payoffs.get(prof)
            if u is None:
                raise SpecError(f"no payoff for profile {prof}")
            if len(u) != self.n:
                raise SpecError(f"payoff at {prof} has {len(u)} entries, expected {self.n}")
        if len(payoffs) != len(list(self.profiles())):
            raise SpecError("payoffs mention profiles outside the strategy sets")

    def __hash__(self):
        return hash((self.strategies, tuple(sorted(self.payoffs.items()))))

    @property
    def n(self) -> int:
        return len(self.strategies)

    def profiles(self):
        return itertools.product(*self.strategies)

    def utility(self, i: int, prof) -> Fraction:
        return self.payoffs[tuple(prof)][i]

    def deviate(self, prof, i, s):
        return tuple(prof[:i]) + (s,) + tuple(prof[i + 1:])

    def utility_range(self, i: int):
        us = [u[i] for u in self.payoffs.values()]
        return min(us), max(us)

    def is_zero_sum(self) -> bool:
        return self.n == 2 and all(u[0] + u[1] == 0 for u in self.payoffs.values())


def best_response(game: NormalFormGame, i: int, prof, order: Sequence) -> str:
    """Tie-break-first maximiser of player i's utility against ``prof``."""
    best, best_u = None, None
    for s in order:
        u = game.utility(i, game.deviate(prof, i, s))
        if best_u is None or u > best_u:
            best, best_u = s, u
    return best


def pure_nash(game: NormalFormGame) -> set:
    out = set()
    for prof in game.profiles():
        if all(game.utility(i, prof) >= game.utility(i, game.deviate(prof, i, s))
               for i in range(game.n) for s in game.strategies[i]):
            out.add(prof)
    return out


def game_to_system(game: NormalFormGame, tie_break: Optional[Sequence] = None) -> SystemSpec:
    """Best-response dynamics; each player's preference among equal replies is ``tie_break[i]``."""
    orders = [tuple(s) for s in (tie_break or game.strategies)]
    for i, order in enumerate(orders):
        if sorted(order) != sorted(game.strategies[i]):
            raise SpecError(f"tie-break order for player {i} is not a permutation of its strategies")
    funcs = [(lambda a, i=i: best_response(game, i, a, orders[i])) for i in range(game.n)]
    return historyless_spec(game.strategies, funcs,
                            Flags(deterministic=True, self_independent=True))


def _game2(rows, cols, table):
    payoffs = {}
    for (r, c), u in table.items():
        payoffs[(r, c)] = u
    return NormalFormGame((rows, cols), payoffs)


def coordination_game() -> NormalFormGame:
    return _game2(("A", "B"), ("A", "B"), {
        ("A", "A"): (1, 1), ("A", "B"): (0, 0), ("B", "A"): (0, 0), ("B", "B"): (1, 1)})


def prisoners_dilemma() -> NormalFormGame:
    return _game2(("C", "D"), ("C", "D"), {
        ("C", "C"): (3, 3), ("C", "D"): (0, 5), ("D", "C"): (5, 0), ("D", "D"): (1, 1)})


def matching_pennies() -> NormalFormGame:
    return _game2(("H", "T"), ("H", "T"), {
        ("H", "H"): (1, -1), ("H", "T"): (-1, 1), ("T", "H"): (-1, 1), ("T", "T"): (1, -1)})


def zero_sum_game(matrix) -> NormalFormGame:
    rows = tuple(f"r{i + 1}" for i in range(len(matrix)))
    cols = tuple(f"c{j + 1}" for j in range(len(matrix[0])))
    return NormalFormGame((rows, cols), {
        (rows[i], cols[j]): (matrix[i][j], -Fraction(matrix[i][j]))
        for i in range(len(rows)) for j in range(len(cols))})


# ---------------------------------------------------------------------------
# circuits
# ---------------------------------------------------------------------------

_GATES = {
    "NOT": (1, lambda xs: 1 - xs[0]),
    "BUF": (1, lambda xs: xs[0]),
    "AND": (None, lambda xs: int(all(xs))),
    "OR": (None, lambda xs: int(any(xs))),
    "NAND": (None, lambda xs: 1 - int(all(xs))),
    "NOR": (None, lambda xs: 1 - int(any(xs))),
    "XOR": (None, lambda xs: sum(xs) % 2),
    "XNOR": (None, lambda xs: 1 - sum(xs) % 2),
}


@dataclass(frozen=True)
class Gate:
    name: str
    kind: str
    sources: tuple
    table: tuple = ()  # TABLE gates: outputs in product order of the sources (first source slowest)

    def evaluate(self, xs) -> int:
        if self.kind == "TABLE":
            idx = 0
            for x in xs:
                idx = idx * 2 + x
            return self.table[idx]
        return _GATES[self.kind][1](xs)


@dataclass(frozen=True)
class CircuitNetlist:
    inputs: tuple  # (name, bit)
    gates: tuple

    def __post_init__(self):
        names = [nm for nm, _ in self.inputs] + [g.name for g in self.gates]
        if len(set(names)) != len(names):
            raise SpecError("duplicate vertex names in netlist")
        known = set(names)
        for nm, bit in self.inputs:
            if bit not in (0, 1):
                raise SpecError(f"input {nm} must be 0 or 1")
        for g in self.gates:
            if g.kind == "TABLE":
                if len(g.table) != 2 ** len(g.sources) or set(g.table) - {0, 1}:
                    raise SpecError(f"gate {g.name}: truth table size does not match fan-in")
            elif g.kind in _GATES:
                arity = _GATES[g.kind][0]
                if arity is not None and len(g.sources) != arity:
                    raise SpecError(f"gate {g.name}: {g.kind} takes {arity} input(s)")
                if arity is None and len(g.sources) < 2:
                    raise SpecError(f"gate {g.name}: {g.kind} needs at least two inputs")
            else:
                raise SpecError(f"gate {g.name}: unknown kind {g.kind}")
            for s in g.sources:
                if s not in known:
                    raise SpecError(f"gate {g.name}: unknown source {s}")

    @property
    def names(self):
        return tuple(nm for nm, _ in self.inputs) + tuple(g.name for g in self.gates)


def circuit_to_system(net: CircuitNetlist) -> SystemSpec:
    """Inputs are constant nodes; each gate recomputes from its sources' current bits."""
    names = net.names
    pos = {nm: j for j, nm in enumerate(names)}
    funcs = []
    for nm, bit in net.inputs:
        funcs.append(lambda a, b=str(bit): b)
    for g in net.gates:
        src = [pos[s] for s in g.sources]
        funcs.append(lambda a, g=g, src=src: str(g.evaluate([int(a[j]) for j in src])))
    self_fed = any(g.name in g.sources for g in net.gates)
    return historyless_spec([("0", "1")] * len(names), funcs,
                            Flags(deterministic=True, self_independent=not self_fed),
                            names=names)


def sr_latch() -> CircuitNetlist:
    return CircuitNetlist((("r", 0), ("s", 0)), (
        Gate("q", "NOR", ("r", "qbar")),
        Gate("qbar", "NOR", ("s", "q")),
    ))


# ---------------------------------------------------------------------------
# social networks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SocialGraph:
    """``friends[i]`` lists the nodes whose technology node ``i`` watches."""

    friends: tuple
    names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "friends", tuple(tuple(f) for f in self.friends))
        n = len(self.friends)
        for i, fs in enumerate(self.friends):
            if not fs:
                raise SpecError(f"node {i} has no friends; majority is undefined")
            for f in fs:
                if not 0 <= f < n:
                    raise SpecError(f"node {i}: friend {f} out of range")
                if f == i:
                    raise SpecError(f"node {i} lists itself as a friend")
            if len(set(fs)) != len(fs):
                raise SpecError(f"node {i} lists a friend twice")


def social_to_system(g: SocialGraph) -> SystemSpec:
    """Majority dynamics: X if at least half of a node's friends use X, else Y."""
    n = len(g.friends)
    reactions = [ReactionFn.named("majority", friends=list(fs)) for fs in g.friends]
    return SystemSpec([("X", "Y")] * n, reactions, 1, 1,
                      Flags(deterministic=True, self_independent=True), names=g.names)


def mutual_graph(n: int, edges) -> SocialGraph:
    friends = [[] for _ in range(n)]
    for a, b in edges:
        friends[a].append(b)
        friends[b].append(a)
    return SocialGraph(tuple(tuple(sorted(f)) for f in friends))


# ---------------------------------------------------------------------------
# stable paths problems
# ---------------------------------------------------------------------------

EMPTY_ROUTE = "none"


def route_symbol(route) -> str:
    return "-".join(route) if route else EMPTY_ROUTE


@dataclass(frozen=True)
class SppInstance:
    """Each AS ranks its permitted routes, best first; the empty route ranks last.

    Routes are tuples of AS names from the owner to the destination.
    """

    destination: str
    rankings: dict

    def __post_init__(self):
        rankings = {k: tuple(tuple(r) for r in v) for k, v in self.rankings.items()}
        object.__setattr__(self, "rankings", rankings)
        if self.destination in rankings:
            raise SpecError("the destination does not rank routes")
        for node, routes in rankings.items():
            if len(set(routes)) != len(routes):
                raise SpecError(f"AS {node}: ranking repeats a route")
            for r in routes:
                if len(r) < 2 or r[0] != node or r[-1] != self.destination:
                    raise SpecError(f"AS {node}: route {route_symbol(r)} must run from {node} "
                                    f"to {self.destination}")
                if len(set(r)) != len(r):
                    raise SpecError(f"AS {node}: route {route_symbol(r)} is not simple")
                for hop in r[1:-1]:
                    if hop not in rankings:
                        raise SpecError(f"AS {node}: route passes unknown AS {hop}")

    def __hash__(self):
        return hash((self.destination, tuple(sorted(self.rankings.items()))))

    @property
    def nodes(self):
        return tuple(sorted(self.rankings))


def routing_to_system(spp: SppInstance) -> SystemSpec:
    """Each AS takes its best permitted route whose remainder its next hop currently uses."""
    nodes = spp.nodes
    pos = {v: j for j, v in enumerate(nodes)}
    alphabets = [tuple(route_symbol(r) for r in spp.rankings[v]) + (EMPTY_ROUTE,) for v in nodes]
    check_size(len(list(itertools.product(*alphabets))) * len(nodes), "routing system")

    def react(v):
        routes = spp.rankings[v]

        def choose(a):
            for r in routes:
                nxt = r[1]
                if nxt == spp.destination and len(r) == 2:
                    return route_symbol(r)
                if nxt in pos and a[pos[nxt]] == route_symbol(r[1:]):
                    return route_symbol(r)
            return EMPTY_ROUTE
        return choose

    return historyless_spec(alphabets, [react(v) for v in nodes],
                            Flags(deterministic=True, self_independent=True), names=nodes)


def disagree() -> SppInstance:
    return SppInstance("0", {"1": [("1", "2", "0"), ("1", "0")],
                             "2": [("2", "1", "0"), ("2", "0")]})


def bad_gadget() -> SppInstance:
    return SppInstance("0", {
        "1": [("1", "2", "0"), ("1", "0")],
        "2": [("2", "3", "0"), ("2", "0")],
        "3": [("3", "1", "0"), ("3", "0")],
    })


def shortest_path_spp(edges, destination: str = "0") -> SppInstance:
    """All simple paths permitted, ranked by hop count then lexicographically."""
    adj = {}
    for a, b in edges:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    rankings = {}
    for v in sorted(adj):
        if v == destination:
            continue
        paths = []

        def walk(path):
            u = path[-1]
            if u == destination:
                paths.append(tuple(path))
                return
            for w in sorted(adj[u]):
                if w not in path:
                    walk(path + [w])

        walk([v])
        paths.sort(key=lambda p: (len(p), p))
        rankings[v] = paths
    return SppInstance(destination, rankings)


# ---------------------------------------------------------------------------
# congestion control
# ---------------------------------------------------------------------------

Policy = Union[str, Callable]


@dataclass(frozen=True)
class Connection:
    name: str
    route: tuple  # edge names in order
    rate: Fraction


@dataclass(frozen=True)
class Link:
    name: str
    capacity: Fraction
    policy: Policy = "fair"
    priority: tuple = ()  # connection names, highest first, for the priority policy


@dataclass(frozen=True)
class CongestionNetwork:
    links: tuple
    connections: tuple
    unit: Fraction = Fraction(1)

    def __post_init__(self):
        names = {l.name for l in self.links}
        if len(names) != len(self.links):
            raise SpecError("duplicate link names")
        if self.unit <= 0:
            raise SpecError("grid unit must be positive")
        for l in self.links:
            if l.capacity < 0 or (l.capacity / self.unit).denominator != 1:
                raise SpecError(f"link {l.name}: capacity must be a nonnegative multiple of the unit")
        for c in self.connections:
            if not c.route or any(e not in names for e in c.route):
                raise SpecError(f"connection {c.name}: bad route")
            if len(set(c.route)) != len(c.route):
                raise SpecError(f"connection {c.name}: route repeats a link")
            if c.rate < 0 or (c.rate / self.unit).denominator != 1:
                raise SpecError(f"connection {c.name}: rate must be a nonnegative multiple of the unit")

    def users(self, link: str):
        return [c for c in self.connections if link in c.route]


def _fmt_q(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def allocation_symbol(xs) -> str:
    return "-".join(_fmt_q(x) for x in xs) if xs else "idle"


def fair_share(capacity, demands, unit):
    """Round-robin one grid unit at a time to every connection with unmet demand."""
    alloc = [Fraction(0)] * len(demands)
    left = capacity
    while left >= unit:
        moved = False
        for j, d in enumerate(demands):
            if left >= unit and alloc[j] + unit <= d:
                alloc[j] += unit
                left -= unit
                moved = True
        if not moved:
            break
    return alloc


def strict_priority(capacity, demands, order):
    alloc = [Fraction(0)] * len(demands)
    left = capacity
    for j in order:
        alloc[j] = min(demands[j], left)
        left -= alloc[j]
    return alloc


def congestion_to_system(net: CongestionNetwork) -> SystemSpec:
    """One node per link; its action is the grid allocation to the connections using it.

    A connection's demand at a link is its rate at the first hop, otherwise
    what the previous link on its route currently allocates to it.
    """
    links = net.links
    pos = {l.name: j for j, l in enumerate(links)}
    users = [net.users(l.name) for l in links]
    alphabets = []
    for l, us in zip(links, users):
        steps = int(l.capacity / net.unit)
        grid = []
        for xs in itertools.product(range(steps + 1), repeat=len(us)):
            if sum(xs) <= steps and all(x * net.unit <= c.rate for x, c in zip(xs, us)):
                grid.append(tuple(x * net.unit for x in xs))
        alphabets.append(grid)
    check_size(len(list(itertools.product(*[range(len(a)) for a in alphabets]))) * len(links),
               "congestion system")
    parse = [{allocation_symbol(x): x for x in a} for a in alphabets]

    def demand(a, c, link_name):
        k = c.route.index(link_name)
        if k == 0:
            return c.rate
        prev = c.route[k - 1]
        j = pos[prev]
        return parse[j][a[j]][users[j].index(c)]

    def react(j):
        l, us = links[j], users[j]

        def f(a):
            w = [demand(a, c, l.name) for c in us]
            if l.policy == "fair":
                x = fair_share(l.capacity, w, net.unit)
            elif l.policy == "priority":
                names = [c.name for c in us]
                order = [names.index(p) for p in l.priority if p in names]
                order += [k for k in range(len(us)) if k not in order]
                x = strict_priority(l.capacity, w, order)
            elif callable(l.policy):
                x = [Fraction(v) for v in l.policy(l.capacity, w, net.unit)]
            else:
                raise SpecError(f"link {l.name}: unknown policy {l.policy!r}")
            if len(x) != len(w) or any(xi < 0 or xi > wi for xi, wi in zip(x, w)):
                raise SpecError(f"link {l.name}: policy allocates more than the incoming flow")
            if sum(x) > l.capacity:
                raise SpecError(f"link {l.name}: policy exceeds capacity")
            if any((xi / net.unit).denominator != 1 for xi in x):
                raise SpecError(f"link {l.name}: policy leaves the grid")
            return allocation_symbol(x)
        return f

    return historyless_spec([tuple(allocation_symbol(x) for x in a) for a in alphabets],
                            [react(j) for j in range(len(links))],
                            Flags(deterministic=True, self_independent=True),
                            names=tuple(l.name for l in links))


def opposed_priority_ring() -> CongestionNetwork:
    """Two unit links in a ring; each gives priority to the connection that entered elsewhere."""
    one = Fraction(1)
    return CongestionNetwork(
        (Link("e1", one, "priority", ("B",)), Link("e2", one, "priority", ("A",))),
        (Connection("A", ("e1", "e2"), one), Connection("B", ("e2", "e1"), one)),
    )


def single_link() -> CongestionNetwork:
    return CongestionNetwork((Link("e1", Fraction(2), "fair"),),
                             (Connection("A", ("e1",), Fraction(1)),))
