"""Named example systems, snake-in-the-box systems and reduction instances."""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterable, Optional

from .core import Flags, ReactionFn, SpecError, SystemSpec, historyless_spec

X, Y, Z = "x", "y", "z"
HALT = "halt"

#: certified lower bound on the maximal snake length as a fraction of 2^z
SNAKE_LAMBDA = 0.3


# ---------------------------------------------------------------------------
# small examples
# ---------------------------------------------------------------------------


def _latched(sym: str) -> bool:
    return sym.endswith("*")


def _base(sym: str) -> str:
    return sym.rstrip("*")


def example_latch() -> SystemSpec:
    """Two nodes; node 2 copies node 1 and node 1 plays y once node 2 has ever moved x -> y.

    The unbounded memory is folded into node 2's alphabet: a ``*`` suffix
    marks that node 2 has switched from x to y at some point.  Node 1 reads
    only that mark, so it stays self-independent; node 2 reads its own mark.
    """

    def node1(a):
        return Y if _latched(a[1]) else X

    def node2(a):
        v = a[0]
        latched = _latched(a[1]) or (_base(a[1]) == X and v == Y)
        return v + "*" if latched else v

    return historyless_spec(
        [(X, Y), (X, Y, X + "*", Y + "*")], [node1, node2],
        Flags(deterministic=True, self_independent=False),
        origin=("ex1", ()),
    )


def example_pair_flip() -> SystemSpec:
    """Two nodes; a node moves to y from (x, x) and otherwise keeps its action."""

    def react(i):
        return lambda a: Y if a == (X, X) else a[i]

    return historyless_spec([(X, Y)] * 2, [react(0), react(1)],
                            Flags(deterministic=True, self_independent=False),
                            origin=("ex2", ()))


def _others(n, sym):
    return ",".join([sym] * (n - 1))


def example_unanimity(n: int) -> SystemSpec:
    """Each node plays x iff all other nodes play x, else y."""
    if n < 2:
        raise SpecError("needs n >= 2")
    fn = ReactionFn.named("others_pattern", default=Y, on=[f"{_others(n, X)}:{X}"])
    return SystemSpec([(X, Y)] * n, [fn] * n, 1, 1,
                      Flags(deterministic=True, self_independent=True),
                      origin=("ex3", (("n", str(n)),)))


def example_three_action(n: int) -> SystemSpec:
    """Three actions; only profiles near x^n or z^n can reach a stable state."""
    if n < 3:
        raise SpecError("needs n >= 3")
    common = [f"{_others(n, X)}:{X}", f"{_others(n, Z)}:{Z}"]
    extra = [",".join([X] + [Y] * (n - 2)) + f":{Y}", f"{_others(n, Y)}:{X}"]
    head = ReactionFn.named("others_pattern", default=Y, on=common + extra)
    tail = ReactionFn.named("others_pattern", default=Y, on=common)
    return SystemSpec([(X, Y, Z)] * n, [head, head] + [tail] * (n - 2), 1, 1,
                      Flags(deterministic=True, self_independent=True),
                      origin=("ex4", (("n", str(n)),)))


def make_example(name: str, n: Optional[int] = None) -> SystemSpec:
    if name == "ex1":
        return example_latch()
    if name == "ex2":
        return example_pair_flip()
    if name in ("ex3", "ex4"):
        if n is None:
            raise SpecError(f"{name} needs n")
        return example_unanimity(n) if name == "ex3" else example_three_action(n)
    raise SpecError(f"unknown example {name!r}")


# ---------------------------------------------------------------------------
# snakes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Snake:
    """A simple chordless cycle in the z-cube; vertex bit d is coordinate d."""

    z: int
    vertices: tuple

    def __len__(self):
        return len(self.vertices)

    def bitstring(self, v: int) -> str:
        return "".join(str(v >> d & 1) for d in range(self.z))

    def to_text(self) -> str:
        return "".join(self.bitstring(v) + "\n" for v in self.vertices)

    @classmethod
    def from_text(cls, text: str) -> "Snake":
        rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows:
            raise SpecError("empty snake")
        z = len(rows[0])
        verts = []
        for row in rows:
            if len(row) != z or set(row) - {"0", "1"}:
                raise SpecError(f"bad snake vertex {row!r}")
            verts.append(sum(1 << d for d, ch in enumerate(row) if ch == "1"))
        snake = cls(z, tuple(verts))
        validate_snake(snake)
        return snake


def _adjacent(u: int, v: int) -> bool:
    d = u ^ v
    return d != 0 and d & (d - 1) == 0


def validate_snake(s: Snake) -> None:
    vs = s.vertices
    m = len(vs)
    if s.z < 2 or m < 4:
        raise SpecError("a snake needs z >= 2 and at least 4 vertices")
    if any(not 0 <= v < 2**s.z for v in vs):
        raise SpecError("snake vertex outside the cube")
    if len(set(vs)) != m:
        raise SpecError("snake is not simple")
    for a in range(m):
        for b in range(a + 1, m):
            consecutive = b == a + 1 or (a == 0 and b == m - 1)
            if _adjacent(vs[a], vs[b]) != consecutive:
                raise SpecError(f"snake broken or chorded at positions {a}, {b}")


def find_max_snake(z: int, budget: Optional[int] = None):
    """Longest snake found by depth-first search; returns ``(snake, exact)``.

    The search grows chordless paths from vertex 0.  Cube symmetries are
    factored out by fixing the start vertex and only ever stepping into the
    lowest unused dimension when opening a new one.  Without a budget (or
    when the search finishes within it) the result is a maximum snake.
    """
    if z < 2:
        raise SpecError("snakes need z >= 2")
    best: list = []
    on_path = [False] * (1 << z)
    # number of path vertices adjacent to each vertex
    touch = [0] * (1 << z)
    path = [0]
    on_path[0] = True
    for d in range(z):
        touch[1 << d] += 1
    nodes = 0
    exhausted = False

    def push(v):
        path.append(v)
        on_path[v] = True
        for d in range(z):
            touch[v ^ (1 << d)] += 1

    def pop():
        v = path.pop()
        on_path[v] = False
        for d in range(z):
            touch[v ^ (1 << d)] -= 1

    def dfs(used):
        nonlocal nodes, best, exhausted
        nodes += 1
        if budget is not None and nodes > budget:
            exhausted = True
            return
        head = path[-1]
        limit = min(used + 1, z)
        for d in range(limit):
            v = head ^ (1 << d)
            if on_path[v]:
                continue
            # v touches head; it may also touch the start, which closes a cycle
            if touch[v] == 1:
                push(v)
                dfs(max(used, d + 1))
                pop()
            elif touch[v] == 2 and _adjacent(v, 0) and len(path) >= 3:
                if len(path) + 1 > len(best):
                    best = path + [v]
            if exhausted:
                return

    push(1)
    dfs(1)
    snake = Snake(z, tuple(best))
    validate_snake(snake)
    return snake, not exhausted


def snake_lower_bound(z: int) -> float:
    return SNAKE_LAMBDA * 2**z


def normalize_snake(s: Snake) -> Snake:
    """Relabel by a cube automorphism so vertex 0 lies on the snake.

    Among such relabelings, prefer one that puts the all-ones vertex off
    the snake.
    """
    full = (1 << s.z) - 1
    choices = sorted(s.vertices)
    pick = next((m for m in choices if (full ^ m) not in s.vertices), choices[0])
    return Snake(s.z, tuple(v ^ pick for v in s.vertices))


def _orientation(snake: Snake):
    """Per cube vertex, the mask of coordinates whose edge points away from it."""
    z = snake.z
    pos = {v: j for j, v in enumerate(snake.vertices)}
    m = len(snake.vertices)
    out = [0] * (1 << z)
    for v in range(1 << z):
        for d in range(z):
            u = v ^ (1 << d)
            if v in pos and u in pos:
                leaves = snake.vertices[(pos[v] + 1) % m] == u
            elif v in pos:
                leaves = False
            elif u in pos:
                leaves = True
            else:
                leaves = bool(v >> d & 1)  # towards x in that coordinate
            if leaves:
                out[v] |= 1 << d
    return out


def _cube_vertex(a, offset, z):
    return sum(1 << d for d in range(z) if a[offset + d] == Y)


def build_snake_system(snake: Snake) -> SystemSpec:
    """Two gate nodes plus ``z`` nodes walking the cube along the snake.

    Gate nodes play x iff every other node plays x.  Cube nodes play y once
    both gates are y; otherwise they follow the edge orientation: around
    the snake, into the snake from outside it, towards x elsewhere.
    """
    validate_snake(snake)
    if 0 not in snake.vertices:
        raise SpecError("snake must contain the all-x vertex; use normalize_snake")
    z = snake.z
    n = z + 2
    away = _orientation(snake)

    def gate(i):
        return lambda a: X if all(a[j] == X for j in range(n) if j != i) else Y

    def cube(d):
        def react(a):
            if a[0] == Y and a[1] == Y:
                return Y
            v = _cube_vertex(a, 2, z)
            bit = (v >> d & 1) ^ (away[v] >> d & 1)
            return Y if bit else X
        return react

    funcs = [gate(0), gate(1)] + [cube(d) for d in range(z)]
    return historyless_spec([(X, Y)] * n, funcs,
                            Flags(deterministic=True, self_independent=True),
                            origin=("snake-system", (("snake", _snake_param(snake)),)))


def _snake_param(snake: Snake) -> str:
    return ",".join(snake.bitstring(v) for v in snake.vertices)


def snake_from_param(text: str) -> Snake:
    return Snake.from_text(text.replace(",", "\n"))


def snake_oscillation(snake: Snake):
    """Initial profile x^n and the schedule that walks the cube nodes round the snake.

    Everyone is activated once at x^n, then the cube nodes alone for
    ``|S| - 1`` steps; the cycle is r-fair for ``r = |S|``.
    """
    n = snake.z + 2
    cycle = (frozenset(range(n)),) + (frozenset(range(2, n)),) * (len(snake) - 1)
    return (X,) * n, cycle


def build_disjointness_system(e_a: Iterable[int], e_b: Iterable[int], snake: Snake) -> SystemSpec:
    """Set-disjointness instance: elements ``1..q`` are the snake's vertices in order."""
    validate_snake(snake)
    if 0 not in snake.vertices:
        raise SpecError("snake must contain the all-x vertex; use normalize_snake")
    q = len(snake)
    e_a, e_b = frozenset(e_a), frozenset(e_b)
    for j in e_a | e_b:
        if not 1 <= j <= q:
            raise SpecError(f"element {j} outside 1..{q}")
    z = snake.z
    n = z + 2
    away = _orientation(snake)
    vertex_a = frozenset(snake.vertices[j - 1] for j in e_a)
    vertex_b = frozenset(snake.vertices[j - 1] for j in e_b)

    def holder(other, marked):
        return lambda a: X if a[other] == Y and _cube_vertex(a, 2, z) in marked else Y

    def cube(d):
        def react(a):
            if not (a[0] == X and a[1] == X):
                return Y
            v = _cube_vertex(a, 2, z)
            bit = (v >> d & 1) ^ (away[v] >> d & 1)
            return Y if bit else X
        return react

    funcs = [holder(1, vertex_a), holder(0, vertex_b)] + [cube(d) for d in range(z)]
    params = (("a", ",".join(map(str, sorted(e_a)))), ("b", ",".join(map(str, sorted(e_b)))),
              ("snake", _snake_param(snake)))
    return historyless_spec([(X, Y)] * n, funcs,
                            Flags(deterministic=True, self_independent=True),
                            origin=("disjointness", params))


# ---------------------------------------------------------------------------
# string machines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StringMachine:
    """``g`` maps every string in ``gamma^t`` to a symbol of gamma or ``halt``."""

    gamma: tuple
    t: int
    g: dict

    def __post_init__(self):
        if HALT in self.gamma:
            raise SpecError("halt must not be in the alphabet")
        if self.t < 1:
            raise SpecError("t must be at least 1")
        for T in itertools.product(self.gamma, repeat=self.t):
            if self.g.get(T) not in self.gamma + (HALT,):
                raise SpecError(f"g undefined or out of range at {T}")
        if len(self.g) != len(self.gamma) ** self.t:
            raise SpecError("g has entries outside gamma^t")

    def __hash__(self):
        return hash((self.gamma, self.t, tuple(sorted(self.g.items()))))


@dataclass(frozen=True)
class Halted:
    steps: int


@dataclass(frozen=True)
class RunningAt:
    steps: int


STRING_GUARD = 4096 * 16


def run_string_machine(m: StringMachine, T0, max_steps: int):
    T = list(T0)
    if len(T) != m.t:
        raise SpecError(f"initial string has length {len(T)}, expected {m.t}")
    i = 0
    for step in range(max_steps):
        out = m.g[tuple(T)]
        if out == HALT:
            return Halted(step)
        T[i] = out
        i = (i + 1) % m.t
    if m.g[tuple(T)] == HALT:
        return Halted(max_steps)
    return RunningAt(max_steps)


def string_machine_nonterminates(m: StringMachine) -> bool:
    """Exact: some start string loops forever in the finite ``(T, i)`` space."""
    states = len(m.gamma) ** m.t * m.t
    if states > STRING_GUARD:
        raise SpecError(f"string machine state space {states} above guard")
    halts = {}  # (T, i) -> bool, memoised over every visited state
    for T0 in itertools.product(m.gamma, repeat=m.t):
        trail = []
        on_trail = set()
        state = (T0, 0)
        while True:
            if state in halts:
                result = halts[state]
                break
            if state in on_trail:
                result = False
                break
            on_trail.add(state)
            trail.append(state)
            T, i = state
            out = m.g[T]
            if out == HALT:
                result = True
                break
            T = T[:i] + (out,) + T[i + 1:]
            state = (T, (i + 1) % m.t)
        for s in trail:
            halts[s] = result
        if not halts[(T0, 0)]:
            return True
    return False


def counter_symbol(j: int, gamma: str) -> str:
    return f"{j}@{gamma}"


def build_string_system(m: StringMachine) -> SystemSpec:
    """``t`` index nodes holding the string plus one counter node ``(j, gamma)``.

    ``g`` is applied only to strings over gamma; any string containing
    ``halt`` maps to ``halt``.
    """
    if m.t < 2:
        raise SpecError("the string system needs t >= 2")
    t = m.t
    index_alpha = m.gamma + (HALT,)
    counter_alpha = tuple(counter_symbol(j, s) for j in range(t) for s in index_alpha)

    def parse_counter(sym):
        j, _, gamma = sym.partition("@")
        return int(j), gamma

    def g_ext(T):
        return HALT if HALT in T else m.g[T]

    def index_node(i):
        def react(a):
            j, gamma = parse_counter(a[t])
            if gamma == HALT:
                return HALT
            if j == i and a[j] != gamma:
                return gamma
            return a[i]
        return react

    def counter(a):
        j, gamma = parse_counter(a[t])
        if gamma == HALT:
            return a[t]
        if a[j] == gamma:
            return counter_symbol((j + 1) % t, g_ext(tuple(a[:t])))
        return a[t]

    funcs = [index_node(i) for i in range(t)] + [counter]
    names = tuple(str(i) for i in range(t)) + ("counter",)
    return historyless_spec([index_alpha] * t + [counter_alpha], funcs,
                            Flags(deterministic=True, self_independent=False),
                            names=names, origin=("string", _machine_params(m)))


def _machine_params(m: StringMachine):
    rows = ";".join("".join(T) + "=" + m.g[T] for T in itertools.product(m.gamma, repeat=m.t))
    return (("gamma", ",".join(m.gamma)), ("t", str(m.t)), ("g", rows))


def machine_from_params(gamma: str, t: str, g: str) -> StringMachine:
    alpha = tuple(gamma.split(","))
    table = {}
    for row in g.split(";"):
        lhs, _, out = row.partition("=")
        table[tuple(lhs)] = out
    return StringMachine(alpha, int(t), table)


def all_string_machines(gamma=("0", "1"), t: int = 2):
    strings = list(itertools.product(gamma, repeat=t))
    outs = gamma + (HALT,)
    for images in itertools.product(outs, repeat=len(strings)):
        yield StringMachine(gamma, t, dict(zip(strings, images)))


def random_string_machine(rng: random.Random, gamma=("0", "1"), t: int = 3,
                          halt_prob: float = 0.3) -> StringMachine:
    table = {}
    for T in itertools.product(gamma, repeat=t):
        table[T] = HALT if rng.random() < halt_prob else rng.choice(gamma)
    return StringMachine(gamma, t, table)


def flipping_machine(t: int = 2) -> StringMachine:
    """Never halts: writes the negation of the symbol at the current index position."""
    # g cannot see the index, so it flips the first symbol; any non-halting g loops
    gamma = ("0", "1")
    table = {T: ("1" if T[0] == "0" else "0") for T in itertools.product(gamma, repeat=t)}
    return StringMachine(gamma, t, table)


# ---------------------------------------------------------------------------
# random systems
# ---------------------------------------------------------------------------


def random_self_independent(n: int, rng: random.Random) -> SystemSpec:
    """Binary historyless system whose node i ignores coordinate i."""
    tables = []
    for i in range(n):
        table = {}
        for rest in itertools.product((X, Y), repeat=n - 1):
            table[rest] = rng.choice((X, Y))
        tables.append(table)

    def react(i):
        return lambda a: tables[i][a[:i] + a[i + 1:]]

    return historyless_spec([(X, Y)] * n, [react(i) for i in range(n)],
                            Flags(deterministic=True, self_independent=True))


def random_binary(n: int, rng: random.Random) -> SystemSpec:
    """Binary historyless system with uniformly random deterministic tables."""
    tables = [{a: rng.choice((X, Y)) for a in itertools.product((X, Y), repeat=n)}
              for _ in range(n)]
    return historyless_spec([(X, Y)] * n, [(lambda a, t=t: t[a]) for t in tables],
                            Flags(deterministic=True, self_independent=False))


def from_origin(gen_id: str, params: dict) -> SystemSpec:
    """Rebuild a generated system from its ``origin`` stanza (string parameters)."""

    def need(key):
        if key not in params:
            raise SpecError(f"generator {gen_id} needs parameter {key!r}")
        return params[key]

    def elements(text):
        return [int(x) for x in text.split(",") if x]

    if gen_id in ("ex1", "ex2"):
        return make_example(gen_id)
    if gen_id in ("ex3", "ex4"):
        return make_example(gen_id, int(need("n")))
    if gen_id == "snake-system":
        return build_snake_system(snake_from_param(need("snake")))
    if gen_id == "disjointness":
        return build_disjointness_system(elements(params.get("a", "")), elements(params.get("b", "")),
                                         snake_from_param(need("snake")))
    if gen_id == "string":
        return build_string_system(machine_from_params(need("gamma"), need("t"), need("g")))
    raise SpecError(f"unknown generator {gen_id!r}")
