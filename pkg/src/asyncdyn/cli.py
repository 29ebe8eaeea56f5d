"""Command-line entry point.

Exit codes: 0 success or Convergent, 10 NonConvergent, 1 witness rejected,
2 bad input or unmet hypotheses.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis, generators
from .core import SizeGuardError, SpecError, detect_stabilization, run_dynamics
from .formats import (format_profile, format_spec, format_trace, parse_adapter_input,
                      parse_experiment, parse_profile, parse_spec, trace_to_json)
from .regret import REPORT_COLUMNS, report_rows, run_learning
from .schedules import ScheduleError, format_witness, make_schedule, parse_witness

EXIT_OK, EXIT_REJECTED, EXIT_ERROR, EXIT_NONCONVERGENT = 0, 1, 2, 10


class CliError(Exception):
    pass


def _read(path):
    if path in (None, "-"):
        return sys.stdin.read(), "<stdin>"
    try:
        return Path(path).read_text(), path
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from None


def _load_spec(args):
    text, source = _read(args.spec)
    return parse_spec(text, source)


def _load_witness(path):
    text, source = _read(path)
    return parse_witness(text, source)


def _initial(spec, text):
    return spec.initial(*(parse_profile(p) for p in text.split("|")))


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _emit_verdict(args, verdict):
    out = verdict.to_json() + "\n" if args.format == "json" else verdict.to_text()
    sys.stdout.write(out)
    if verdict.witness is not None and args.witness_out:
        _write(args.witness_out, format_witness(verdict.witness, verdict.initial.window))
    return EXIT_OK if verdict.convergent else EXIT_NONCONVERGENT


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args):
    spec = _load_spec(args)
    if args.verify_witness:
        w, init = _load_witness(args.verify_witness)
        if args.initial:
            cfg = _initial(spec, args.initial)
        elif init is not None:
            cfg = spec.initial(*init)
        else:
            raise CliError("witness file has no initial line; pass --initial")
        ok = analysis.verify_witness(spec, cfg, w)
        if args.format == "json":
            print(json.dumps({"witness_verified": ok}))
        else:
            print("witness verified" if ok else "witness rejected")
        return EXIT_OK if ok else EXIT_REJECTED

    witness_init = None
    if args.schedule.startswith("witness:"):
        w, witness_init = _load_witness(args.schedule[len("witness:"):])
        schedule = make_schedule("witness", spec.n, witness=w)
    else:
        schedule = make_schedule(args.schedule, spec.n, r=args.r, seed=args.seed)
    if args.initial:
        cfg = _initial(spec, args.initial)
    elif witness_init is not None:
        cfg = spec.initial(*witness_init)
    else:
        raise CliError("simulate needs --initial")
    trace = run_dynamics(spec, cfg, schedule, args.horizon, seed=args.seed)
    settled = detect_stabilization(trace, spec)
    if args.format == "json":
        out = json.loads(trace_to_json(trace))
        out["stabilized"] = list(settled) if settled else None
        print(json.dumps(out, indent=2))
    else:
        sys.stdout.write(format_trace(trace))
        print("stabilized: " + (format_profile(settled) if settled else "no"))
    return EXIT_OK


def cmd_stable_states(args):
    spec = _load_spec(args)
    states = sorted(analysis.stable_profiles(spec))
    if args.format == "json":
        print(json.dumps([list(p) for p in states]))
    else:
        for p in states:
            print(format_profile(p))
    return EXIT_OK


def cmd_check(args):
    spec = _load_spec(args)
    return _emit_verdict(args, analysis.decide_convergent(spec, args.activation_cap))


def cmd_check_r(args):
    spec = _load_spec(args)
    if args.r is None:
        raise CliError("check-r needs --r")
    return _emit_verdict(args, analysis.decide_r_convergent(spec, args.r, args.activation_cap))


def cmd_synthesize(args):
    spec = _load_spec(args)
    cfg, w = analysis.synthesize_oscillation(spec, args.activation_cap)
    _write(args.out, format_witness(w, cfg.window))
    return EXIT_OK


def cmd_color(args):
    spec = _load_spec(args)
    coloring = analysis.stable_coloring(spec)
    comp = coloring.compiled
    rows = []
    if args.initial:
        cfgs = [_initial(spec, args.initial)]
    else:
        cfgs = [comp.configuration(c) for c in range(comp.nconf)]
    for cfg in cfgs:
        rows.append((cfg.window, sorted(coloring.color(cfg))))
    if args.format == "json":
        print(json.dumps([{"window": [list(p) for p in w], "color": [list(p) for p in col],
                           "polychromatic": len(col) >= 2} for w, col in rows]))
    else:
        for w, col in rows:
            print(" | ".join(map(format_profile, w)) + " -> "
                  + (" ; ".join(map(format_profile, col)) or "none"))
    return EXIT_OK


def cmd_generate(args):
    kind = args.kind
    if kind in ("ex1", "ex2"):
        spec = generators.make_example(kind)
    elif kind in ("ex3", "ex4"):
        if args.n is None:
            raise CliError(f"{kind} needs --n")
        spec = generators.make_example(kind, args.n)
    elif kind in ("snake", "disjointness"):
        snake, exact = generators.find_max_snake(args.dim, args.budget)
        snake = generators.normalize_snake(snake)
        if not exact:
            print("# search budget exhausted; snake may not be maximal", file=sys.stderr)
        if args.snake_only:
            sys.stdout.write(snake.to_text())
            return EXIT_OK
        if kind == "snake":
            spec = generators.build_snake_system(snake)
        else:
            spec = generators.build_disjointness_system(_ints(args.a), _ints(args.b), snake)
    elif kind == "string":
        if args.flipping:
            machine = generators.flipping_machine(args.t or 2)
        else:
            if not (args.gamma and args.t and args.g):
                raise CliError("string needs --gamma, --t and --g (or --flipping)")
            machine = generators.machine_from_params(args.gamma, str(args.t), args.g)
        spec = generators.build_string_system(machine)
    else:
        raise CliError(f"unknown generator {kind!r}")
    sys.stdout.write(format_spec(spec))
    return EXIT_OK


def _ints(text):
    return [int(x) for x in (text or "").split(",") if x]


def cmd_adapt(args):
    text, source = _read(args.input)
    sys.stdout.write(format_spec(parse_adapter_input(text, source)))
    return EXIT_OK


def cmd_regret(args):
    text, source = _read(args.config)
    base = Path(args.config).parent if args.config not in (None, "-") else None
    cfg = parse_experiment(text, source, base)
    seeds = [args.seed] if args.seed is not None else cfg["seeds"]
    game = cfg["game"]
    r = args.r or cfg["r"]
    rows = []
    for seed in seeds:
        schedule = make_schedule(cfg["schedule"], game.n, r=r, seed=seed)
        _, report = run_learning(game, cfg["algorithms"], schedule, cfg["T"], seed=seed,
                                 feedback=cfg["feedback"], random_start=cfg["random_start"])
        rows.extend(report_rows(seed, report))
    if args.format == "json":
        print(json.dumps([dict(zip(REPORT_COLUMNS, row)) for row in rows]))
    else:
        print("\t".join(REPORT_COLUMNS))
        for row in rows:
            print("\t".join(map(str, row)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="system file (default: read standard input)")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--seed", type=int, default=None,
                        help="random seed; when absent, seed 0 is used")
    common.add_argument("--activation-cap", type=int, default=None,
                        help="largest simultaneous activation set explored")

    p = argparse.ArgumentParser(prog="asyncdyn",
                                description="Analyse asynchronous interaction systems.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run the dynamics")
    s.add_argument("--initial", help="initial profile(s), e.g. 'x,y' or 'x,y | y,y'")
    s.add_argument("--schedule", default="roundrobin",
                   help="roundrobin, randomfair or witness:FILE")
    s.add_argument("--r", type=int, help="fairness window for randomfair")
    s.add_argument("--horizon", type=int, default=20)
    s.add_argument("--verify-witness", metavar="FILE",
                   help="replay a witness file instead; exit 0 if it certifies oscillation")
    s.set_defaults(func=cmd_simulate)

    sub.add_parser("stable-states", parents=[common], help="list stable profiles") \
        .set_defaults(func=cmd_stable_states)

    for name, func, helptext in (("check", cmd_check, "decide convergence"),
                                 ("check-r", cmd_check_r, "decide r-convergence")):
        c = sub.add_parser(name, parents=[common], help=helptext)
        c.add_argument("--witness-out", metavar="FILE", help="also write the witness file")
        if name == "check-r":
            c.add_argument("--r", type=int, required=True)
        c.set_defaults(func=func)

    s = sub.add_parser("synthesize", parents=[common], help="build an oscillating fair schedule")
    s.add_argument("--out", help="witness file (default: standard output)")
    s.set_defaults(func=cmd_synthesize)

    c = sub.add_parser("color", parents=[common], help="reachable stable states per configuration")
    c.add_argument("--initial")
    c.set_defaults(func=cmd_color)

    g = sub.add_parser("generate", parents=[common], help="print a generated system file")
    g.add_argument("kind", choices=("ex1", "ex2", "ex3", "ex4", "snake", "disjointness", "string"))
    g.add_argument("--n", type=int)
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--budget", type=int, help="node budget for the snake search")
    g.add_argument("--snake-only", action="store_true", help="print the snake instead")
    g.add_argument("--a", help="disjointness set A, e.g. 1,3")
    g.add_argument("--b", help="disjointness set B")
    g.add_argument("--gamma", help="string machine alphabet, e.g. 0,1")
    g.add_argument("--t", type=int, help="string length")
    g.add_argument("--g", help="machine table, e.g. '00=01;01=halt;10=11;11=00'")
    g.add_argument("--flipping", action="store_true", help="the built-in nonterminating machine")
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("adapt", parents=[common], help="convert an adapter input to a system file")
    a.add_argument("input", nargs="?", help="game/netlist/social/spp/congestion file")
    a.set_defaults(func=cmd_adapt)

    r = sub.add_parser("regret", parents=[common], help="run a no-regret experiment")
    r.add_argument("config", nargs="?", help="experiment config file")
    r.add_argument("--r", type=int, help="override the config's fairness window")
    r.set_defaults(func=cmd_regret)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is None and args.command != "regret":
        args.seed = 0
    try:
        return args.func(args)
    except (CliError, SpecError, ScheduleError, SizeGuardError, analysis.SynthesisAnomaly) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
