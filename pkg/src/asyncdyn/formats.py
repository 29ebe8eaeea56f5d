"""Line-oriented text formats for systems, traces, adapter inputs and experiment configs.

Every format ignores blank lines and ``#`` comments.  Node numbers are
1-based.  See FORMATS.md for the grammars with examples.
"""
from __future__ import annotations

import json
import re
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .core import (Configuration, Flags, ReactionFn, SpecError, SystemSpec, Trace,
                   make_dist, point)

SYMBOL_RE = re.compile(r"[^\s,;|:#=]+")
FLAG_NAMES = ("deterministic", "self-independent", "stationary", "historyless")
# named-family parameters holding node indices (0-based in memory, 1-based on disk)
_NODE_PARAMS = {("copy", "source"), ("majority", "friends")}


class ParseError(SpecError):
    """Malformed input file; carries the source name and 1-based line number (0 = whole file)."""

    def __init__(self, source: str, line: int, msg: str):
        self.source, self.line, self.msg = source, line, msg
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {msg}")


def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def _check_symbol(sym: str, what: str = "symbol") -> str:
    if not SYMBOL_RE.fullmatch(sym) or sym == "->":
        raise SpecError(f"{what} {sym!r} cannot be written in the text format")
    return sym


# ---------------------------------------------------------------------------
# distributions, profiles, windows
# ---------------------------------------------------------------------------


def format_dist(dist) -> str:
    if len(dist) == 1 and dist[0][1] == 1:
        return dist[0][0]
    return " ".join(f"{s}:{w}" for s, w in dist)


def parse_dist(text: str):
    parts = text.split()
    if len(parts) == 1 and ":" not in parts[0]:
        return point(parts[0])
    weights = {}
    for part in parts:
        sym, sep, w = part.rpartition(":")
        if not sep or not sym:
            raise SpecError(f"expected symbol:weight, got {part!r}")
        if sym in weights:
            raise SpecError(f"symbol {sym!r} listed twice")
        try:
            weights[sym] = Fraction(w)
        except (ValueError, ZeroDivisionError):
            raise SpecError(f"bad probability {w!r}") from None
    return make_dist(weights)


def format_profile(prof) -> str:
    return ",".join(prof)


def parse_profile(text: str) -> tuple:
    return tuple(x.strip() for x in text.split(","))


def format_window(window) -> str:
    return " ; ".join(format_profile(p) for p in window)


def parse_window(text: str) -> tuple:
    return tuple(parse_profile(p) for p in text.split(";"))


# ---------------------------------------------------------------------------
# system files
# ---------------------------------------------------------------------------


def _flag_words(flags: Flags) -> list:
    d = flags.as_dict()
    return [w for w in FLAG_NAMES if d[w.replace("-", "_")]]


def _named_params_out(family, params):
    out = []
    for key, value in params:
        if (family, key) in _NODE_PARAMS:
            value = ",".join(str(int(v) + 1) for v in value.split(","))
        out.append(f"{key}={value}")
    return out


def _header(spec: SystemSpec) -> list:
    lines = [f"nodes {spec.n}"]
    for i, alpha in enumerate(spec.alphabets):
        lines.append(f"alphabet {i + 1}: " + " ".join(_check_symbol(s) for s in alpha))
    lines.append(f"recall {spec.recall_k}")
    lines.append(f"window {spec.window_w}")
    lines.append(" ".join(["flags"] + list(_flag_words(spec.flags))))
    if spec.names:
        lines.append("names " + " ".join(_check_symbol(nm, "node name") for nm in spec.names))
    return lines


def format_spec(spec: SystemSpec) -> str:
    """Canonical text for a system; ``parse_spec`` inverts it exactly."""
    lines = _header(spec)
    if spec.origin is not None:
        gen_id, params = spec.origin
        lines.append(" ".join([f"generator {gen_id}"] + [f"{k}={v}" for k, v in params]))
        return "\n".join(lines) + "\n"
    windows = list(spec.windows())
    for i, fn in enumerate(spec.reactions):
        if fn.kind == "named":
            lines.append(" ".join([f"named {i + 1} {fn.family}"]
                                  + _named_params_out(fn.family, fn.params)))
            continue
        for w in windows:
            lines.append(f"react {i + 1} | {format_window(w)} -> {format_dist(fn.table[w])}")
        for t in sorted(fn.overrides):
            over = fn.overrides[t]
            for w in (w for w in windows if w in over):
                lines.append(f"react {i + 1} t={t} | {format_window(w)} -> {format_dist(over[w])}")
    return "\n".join(lines) + "\n"


def _node_index(tok: str, n: Optional[int], source: str, lineno: int) -> int:
    try:
        i = int(tok) - 1
    except ValueError:
        raise ParseError(source, lineno, f"expected a node number, got {tok!r}") from None
    if n is None:
        raise ParseError(source, lineno, "'nodes' must come before per-node lines")
    if not 0 <= i < n:
        raise ParseError(source, lineno, f"node {tok} out of range 1..{n}")
    return i


def _kv(tokens, source, lineno) -> list:
    out = []
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or not key:
            raise ParseError(source, lineno, f"expected key=value, got {tok!r}")
        out.append((key, value))
    return out


def parse_spec(text: str, source: str = "<spec>") -> SystemSpec:
    n = None
    alphabets = {}
    recall = 1
    window = None
    flags = None
    names = ()
    tables, overrides, named = {}, {}, {}
    first_line = {}
    generator = None

    for lineno, line in _lines(text):
        word, _, rest = line.partition(" ")
        rest = rest.strip()
        try:
            if word == "nodes":
                n = int(rest)
                if n < 1:
                    raise ParseError(source, lineno, "need at least one node")
            elif word == "alphabet":
                idx, sep, syms = rest.partition(":")
                if not sep:
                    raise ParseError(source, lineno, "expected 'alphabet i: sym sym ...'")
                i = _node_index(idx.strip(), n, source, lineno)
                if i in alphabets:
                    raise ParseError(source, lineno, f"alphabet of node {i + 1} given twice")
                alphabets[i] = tuple(syms.split())
            elif word == "recall":
                recall = int(rest)
            elif word == "window":
                window = int(rest)
            elif word == "flags":
                words = rest.split()
                unknown = set(words) - set(FLAG_NAMES)
                if unknown:
                    raise ParseError(source, lineno, f"unknown flag(s) {sorted(unknown)}")
                flags = Flags(**{w.replace("-", "_"): w in words for w in FLAG_NAMES})
            elif word == "names":
                names = tuple(rest.split())
            elif word == "generator":
                toks = rest.split()
                if not toks:
                    raise ParseError(source, lineno, "generator needs an id")
                generator = (lineno, toks[0], dict(_kv(toks[1:], source, lineno)))
            elif word == "named":
                toks = rest.split()
                if len(toks) < 2:
                    raise ParseError(source, lineno, "expected 'named i family key=value ...'")
                i = _node_index(toks[0], n, source, lineno)
                if i in named or i in tables:
                    raise ParseError(source, lineno, f"node {i + 1} already has a reaction")
                family = toks[1]
                params = []
                for key, value in _kv(toks[2:], source, lineno):
                    if (family, key) in _NODE_PARAMS:
                        value = ",".join(str(int(v) - 1) for v in value.split(","))
                    params.append((key, value))
                named[i] = ReactionFn("named", family=family, params=tuple(params))
                first_line.setdefault(i, lineno)
            elif word == "react":
                head, sep, body = rest.partition("|")
                lhs, arrow, rhs = body.partition("->")
                if not sep or not arrow:
                    raise ParseError(source, lineno, "expected 'react i [t=T] | window -> dist'")
                htoks = head.split()
                if not htoks or len(htoks) > 2:
                    raise ParseError(source, lineno, "expected 'react i [t=T] |'")
                i = _node_index(htoks[0], n, source, lineno)
                if i in named:
                    raise ParseError(source, lineno, f"node {i + 1} already has a named reaction")
                if len(htoks) == 2:
                    key, _, t = htoks[1].partition("=")
                    if key != "t":
                        raise ParseError(source, lineno, f"expected t=T, got {htoks[1]!r}")
                    target = overrides.setdefault(i, {}).setdefault(int(t), {})
                else:
                    target = tables.setdefault(i, {})
                w = parse_window(lhs)
                if w in target:
                    raise ParseError(source, lineno, f"duplicate entry for node {i + 1} at {lhs.strip()}")
                target[w] = parse_dist(rhs.strip())
                first_line.setdefault(i, lineno)
            else:
                raise ParseError(source, lineno, f"unknown keyword {word!r}")
        except ParseError:
            raise
        except (SpecError, ValueError) as e:
            raise ParseError(source, lineno, str(e)) from None

    if n is None and generator is None:
        raise ParseError(source, 0, "missing 'nodes' line")

    if generator is not None:
        from .generators import from_origin

        lineno, gen_id, params = generator
        if tables or named:
            raise ParseError(source, lineno, "a generator file cannot also list reactions")
        try:
            spec = from_origin(gen_id, params)
        except (SpecError, ValueError) as e:
            raise ParseError(source, lineno, str(e)) from None
        if n is not None and (n != spec.n or recall != spec.recall_k
                              or any(alphabets.get(i, a) != a for i, a in enumerate(spec.alphabets))
                              or (flags is not None and flags != spec.flags)
                              or (window is not None and window != spec.window_w)
                              or (names and names != spec.names)):
            raise ParseError(source, lineno,
                             f"header does not match the system generator {gen_id} builds")
        return spec

    missing = [i + 1 for i in range(n) if i not in alphabets]
    if missing:
        raise ParseError(source, 0, f"no alphabet for node(s) {missing}")
    reactions = []
    for i in range(n):
        if i in named:
            reactions.append(named[i])
        elif i in tables:
            reactions.append(ReactionFn.from_table(tables[i], overrides.get(i)))
        else:
            raise ParseError(source, 0, f"node {i + 1} has no reaction")
    try:
        return SystemSpec(tuple(alphabets[i] for i in range(n)), tuple(reactions), recall,
                          window, flags or Flags(), names)
    except SpecError as e:
        # core messages number nodes from 0; files number them from 1
        m = re.match(r"node (\d+)", str(e))
        line = first_line.get(int(m.group(1)), 0) if m else 0
        msg = re.sub(r"node (\d+)", lambda g: f"node {int(g.group(1)) + 1}", str(e))
        raise ParseError(source, line, msg) from None


def load_spec(path: str) -> SystemSpec:
    p = Path(path)
    return parse_spec(p.read_text(), str(p))


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


def format_trace(trace: Trace) -> str:
    lines = []
    if trace.rng_seed is not None:
        lines.append(f"seed: {trace.rng_seed}")
    init = trace.initial
    lines.append(f"initial t={init.t}: " + " | ".join(format_profile(p) for p in init.window))
    t = init.t
    for active, prof in trace.steps:
        t += 1
        lines.append(f"step {t}: {','.join(str(i + 1) for i in sorted(active))} -> "
                     f"{format_profile(prof)}")
    return "\n".join(lines) + "\n"


def parse_trace(text: str, source: str = "<trace>") -> Trace:
    seed = None
    initial = None
    steps = []
    for lineno, line in _lines(text):
        try:
            if line.startswith("seed:"):
                seed = int(line[5:])
            elif line.startswith("initial"):
                head, _, body = line.partition(":")
                t = int(head.split("t=")[1])
                initial = Configuration(tuple(parse_profile(p) for p in body.split("|")), t)
            elif line.startswith("step"):
                head, _, body = line.partition(":")
                act, _, prof = body.partition("->")
                want = (initial.t if initial else 0) + len(steps) + 1
                if int(head.split()[1]) != want:
                    raise ParseError(source, lineno, f"expected step {want}")
                steps.append((frozenset(int(x) - 1 for x in act.split(",")), parse_profile(prof)))
            else:
                raise ParseError(source, lineno, f"unrecognised line {line!r}")
        except ParseError:
            raise
        except (ValueError, IndexError):
            raise ParseError(source, lineno, f"malformed line {line!r}") from None
    if initial is None:
        raise ParseError(source, 0, "missing 'initial' line")
    return Trace(initial, tuple(steps), seed)


def trace_to_json(trace: Trace) -> str:
    return json.dumps({
        "seed": trace.rng_seed,
        "initial": {"t": trace.initial.t, "window": [list(p) for p in trace.initial.window]},
        "steps": [{"active": [i + 1 for i in sorted(a)], "profile": list(p)}
                  for a, p in trace.steps],
    }, indent=2)


# ---------------------------------------------------------------------------
# adapter inputs
# ---------------------------------------------------------------------------


def _frac(tok, source, lineno):
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(source, lineno, f"bad number {tok!r}") from None


def parse_game(text: str, source: str = "<game>"):
    from .adapters import NormalFormGame

    strategies, payoffs = {}, {}
    players = None
    for lineno, line in _lines(text):
        word, _, rest = line.partition(" ")
        if word == "game":
            continue
        if word == "players":
            players = int(rest)
        elif word == "strategies":
            idx, _, syms = rest.partition(":")
            strategies[_node_index(idx.strip(), players, source, lineno)] = tuple(syms.split())
        elif word == "payoff":
            prof, sep, us = rest.partition(":")
            if not sep:
                raise ParseError(source, lineno, "expected 'payoff s1,s2,...: u1 u2 ...'")
            key = parse_profile(prof)
            if key in payoffs:
                raise ParseError(source, lineno, "payoff given twice")
            payoffs[key] = tuple(_frac(u, source, lineno) for u in us.split())
        else:
            raise ParseError(source, lineno, f"unknown keyword {word!r}")
    if players is None or len(strategies) != players:
        raise ParseError(source, 0, "need 'players' and one 'strategies' line per player")
    try:
        return NormalFormGame(tuple(strategies[i] for i in range(players)), payoffs)
    except SpecError as e:
        raise ParseError(source, 0, str(e)) from None


def format_game(game) -> str:
    lines = ["game", f"players {game.n}"]
    lines += [f"strategies {i + 1}: " + " ".join(s) for i, s in enumerate(game.strategies)]
    lines += [f"payoff {format_profile(p)}: " + " ".join(str(u) for u in game.payoffs[p])
              for p in game.profiles()]
    return "\n".join(lines) + "\n"


def parse_netlist(text: str, source: str = "<netlist>"):
    from .adapters import CircuitNetlist, Gate

    inputs, gates = [], []
    for lineno, line in _lines(text):
        toks = line.split()
        if toks[0] == "netlist":
            continue
        if toks[0] == "input" and len(toks) == 3 and toks[2] in ("0", "1"):
            inputs.append((toks[1], int(toks[2])))
        elif toks[0] == "gate" and len(toks) >= 4:
            name, kind, srcs = toks[1], toks[2], toks[3:]
            table = ()
            if kind == "TABLE":
                if len(srcs) < 3 or srcs[-2] != ":":
                    raise ParseError(source, lineno, "expected 'gate g TABLE a b ... : 0110'")
                table = tuple(int(c) for c in srcs[-1])
                srcs = srcs[:-2]
            gates.append(Gate(name, kind, tuple(srcs), table))
        else:
            raise ParseError(source, lineno, f"unrecognised line {line!r}")
    try:
        return CircuitNetlist(tuple(inputs), tuple(gates))
    except (SpecError, ValueError) as e:
        raise ParseError(source, 0, str(e)) from None


def parse_social(text: str, source: str = "<social>"):
    from .adapters import SocialGraph

    n = None
    friends = None
    for lineno, line in _lines(text):
        toks = line.split()
        if toks[0] == "social":
            continue
        if toks[0] == "nodes" and len(toks) == 2:
            n = int(toks[1])
            friends = [[] for _ in range(n)]
        elif toks[0] in ("edge", "watch") and len(toks) == 3:
            a = _node_index(toks[1], n, source, lineno)
            b = _node_index(toks[2], n, source, lineno)
            pairs = [(a, b), (b, a)] if toks[0] == "edge" else [(a, b)]
            for u, v in pairs:
                if v in friends[u]:
                    raise ParseError(source, lineno, f"node {u + 1} already watches {v + 1}")
                friends[u].append(v)
        else:
            raise ParseError(source, lineno, f"unrecognised line {line!r}")
    if n is None:
        raise ParseError(source, 0, "missing 'nodes' line")
    try:
        return SocialGraph(tuple(tuple(sorted(f)) for f in friends))
    except SpecError as e:
        raise ParseError(source, 0, str(e)) from None


def parse_spp(text: str, source: str = "<spp>"):
    from .adapters import SppInstance

    dest = None
    rankings = {}
    for lineno, line in _lines(text):
        word, _, rest = line.partition(" ")
        if word == "spp":
            continue
        if word == "destination":
            dest = rest.strip()
        elif word == "rank":
            node, sep, routes = rest.partition(":")
            node = node.strip()
            if not sep or node in rankings:
                raise ParseError(source, lineno, "expected one 'rank AS: route route ...' per AS")
            rankings[node] = [tuple(r.split("-")) for r in routes.split()]
        else:
            raise ParseError(source, lineno, f"unknown keyword {word!r}")
    if dest is None:
        raise ParseError(source, 0, "missing 'destination' line")
    try:
        return SppInstance(dest, rankings)
    except SpecError as e:
        raise ParseError(source, 0, str(e)) from None


def parse_congestion(text: str, source: str = "<congestion>"):
    from .adapters import CongestionNetwork, Connection, Link

    unit = Fraction(1)
    links, conns = [], []
    for lineno, line in _lines(text):
        toks = line.split()
        if toks[0] == "congestion":
            continue
        if toks[0] == "unit" and len(toks) == 2:
            unit = _frac(toks[1], source, lineno)
        elif toks[0] == "link" and len(toks) >= 6 and toks[2] == "capacity" and toks[4] == "policy":
            policy = toks[5]
            if policy not in ("fair", "priority"):
                raise ParseError(source, lineno, f"unknown policy {policy!r}")
            links.append(Link(toks[1], _frac(toks[3], source, lineno), policy, tuple(toks[6:])))
        elif toks[0] == "connection" and len(toks) >= 6 and toks[2] == "rate" and toks[4] == "route":
            conns.append(Connection(toks[1], tuple(toks[5:]), _frac(toks[3], source, lineno)))
        else:
            raise ParseError(source, lineno, f"unrecognised line {line!r}")
    try:
        return CongestionNetwork(tuple(links), tuple(conns), unit)
    except SpecError as e:
        raise ParseError(source, 0, str(e)) from None


ADAPTER_KINDS = ("game", "netlist", "social", "spp", "congestion")


def parse_adapter_input(text: str, source: str = "<adapter>") -> SystemSpec:
    """Read any adapter input (the first keyword names its kind) and convert it to a system."""
    from . import adapters

    first = next((line.split()[0] for _, line in _lines(text)), None)
    if first not in ADAPTER_KINDS:
        raise ParseError(source, 1, f"first line must be one of {', '.join(ADAPTER_KINDS)}")
    if first == "game":
        return adapters.game_to_system(parse_game(text, source))
    if first == "netlist":
        return adapters.circuit_to_system(parse_netlist(text, source))
    if first == "social":
        return adapters.social_to_system(parse_social(text, source))
    if first == "spp":
        return adapters.routing_to_system(parse_spp(text, source))
    return adapters.congestion_to_system(parse_congestion(text, source))


# ---------------------------------------------------------------------------
# regret experiment configs
# ---------------------------------------------------------------------------

BUILTIN_GAMES = ("matching_pennies", "coordination", "prisoners_dilemma")


def builtin_game(name: str):
    from . import adapters

    table = {"matching_pennies": adapters.matching_pennies,
             "coordination": adapters.coordination_game,
             "prisoners_dilemma": adapters.prisoners_dilemma}
    try:
        return table[name]()
    except KeyError:
        raise SpecError(f"unknown game {name!r}; builtins are {', '.join(BUILTIN_GAMES)}") from None


def _seed_list(text: str) -> list:
    seeds = []
    for part in text.split(","):
        lo, sep, hi = part.partition("-")
        seeds.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    return seeds


def parse_experiment(text: str, source: str = "<experiment>", base: Optional[Path] = None) -> dict:
    """Experiment config as a dict with keys game, algorithms, schedule, r, T, seeds, feedback, random_start."""
    cfg = {"schedule": "randomfair", "r": None, "T": 10000, "seeds": [0],
           "feedback": "expected", "random_start": False}
    for lineno, line in _lines(text):
        key, _, value = line.partition(" ")
        value = value.strip()
        try:
            if key == "game":
                if value.startswith("file:"):
                    path = Path(value[5:])
                    if base is not None and not path.is_absolute():
                        path = base / path
                    cfg["game"] = parse_game(path.read_text(), str(path))
                else:
                    cfg["game"] = builtin_game(value)
            elif key == "algorithms":
                cfg["algorithms"] = value.split()
            elif key == "schedule":
                if value not in ("roundrobin", "randomfair"):
                    raise ParseError(source, lineno, "schedule must be roundrobin or randomfair")
                cfg["schedule"] = value
            elif key == "r":
                cfg["r"] = int(value)
            elif key == "T":
                cfg["T"] = int(value)
            elif key == "seeds":
                cfg["seeds"] = _seed_list(value)
            elif key == "feedback":
                if value not in ("expected", "sampled"):
                    raise ParseError(source, lineno, "feedback must be expected or sampled")
                cfg["feedback"] = value
            elif key == "random_start":
                cfg["random_start"] = value in ("yes", "true", "1")
            else:
                raise ParseError(source, lineno, f"unknown key {key!r}")
        except ParseError:
            raise
        except (SpecError, ValueError, OSError) as e:
            raise ParseError(source, lineno, str(e)) from None
    if "game" not in cfg or "algorithms" not in cfg:
        raise ParseError(source, 0, "need 'game' and 'algorithms'")
    if len(cfg["algorithms"]) != cfg["game"].n:
        raise ParseError(source, 0, "one algorithm per player")
    return cfg
