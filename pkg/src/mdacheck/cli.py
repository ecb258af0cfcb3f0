"""Command-line entry point: ``mdacheck generate|simulate|check|replay``.

Every invocation writes ``manifest.json`` to the output directory (``--out``,
else ``$MDA_OUT_DIR``, else ``./mda_out``). Exit codes are stable:

====  =========================================
0     Holds / Terminated / replay matches
1     Violated (property or controller monitor)
2     usage or configuration error
3     Deadlock
4     Timeout or Inconclusive
5     Aborted (spawn cap)
6     replay divergence
====  =========================================
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .config import ConfigError, SystemConfig, load, save
from .runtime import ReplayDivergence, System, load_trace_records, replay, run_random
from .synth import FIXTURES, SynthParams, build_synthetic
from .verifier import (
    BOUNDED_TERMINATION,
    CONTROLLER_CORRECTNESS,
    HOLDS,
    INCONCLUSIVE,
    OPERABILITY,
    VIOLATED,
    GUARDS,
    check_controller_correctness,
    render,
    verify,
    write_counterexample,
)

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_USAGE = 2
EXIT_DEADLOCK = 3
EXIT_INCONCLUSIVE = 4
EXIT_ABORTED = 5
EXIT_DIVERGED = 6

PROPERTY_NAMES = {
    "controller-correctness": CONTROLLER_CORRECTNESS,
    "operability": OPERABILITY,
    "bounded-termination": BOUNDED_TERMINATION,
}
FAULTS = {"notify-after": "fault_notify_after", "drop-minus-one": "fault_drop_minus_one"}
OUTCOME_EXIT = {
    "Terminated": EXIT_OK,
    HOLDS: EXIT_OK,
    VIOLATED: EXIT_VIOLATED,
    "Deadlock": EXIT_DEADLOCK,
    "Timeout": EXIT_INCONCLUSIVE,
    INCONCLUSIVE: EXIT_INCONCLUSIVE,
    "Aborted": EXIT_ABORTED,
}


class UsageError(Exception):
    pass


# -- configuration -------------------------------------------------------------------


def _add_config_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="config file written by 'generate'")
    g.add_argument("--fixture", choices=sorted(FIXTURES), help="named worked example")
    g.add_argument("--instances", type=int, help="instance agents")
    g.add_argument("--relations", type=int, help="relation agents")
    g.add_argument("--rules", type=int, help="rule agents")
    g.add_argument("--words", type=int, help="text length in words")
    g.add_argument("--hom-lim", type=int, help="homonymic limit per position point")
    g.add_argument("--max-agents", type=int, help="cap on dynamically created agents")
    g.add_argument("--fault", action="append", choices=sorted(FAULTS), default=[], help="inject a fault (repeatable)")
    g.add_argument("--unbounded-spawn", action="store_true", help="every rule result creates a fresh agent")
    g.add_argument("--fine-grain", action="store_true", help="one send per transition")


def build_config(args) -> SystemConfig:
    counts = (args.instances, args.relations, args.rules)
    sources = sum(x is not None for x in (args.config, args.fixture)) + any(c is not None for c in counts)
    if sources > 1:
        raise UsageError("give one of --config, --fixture or agent counts")
    flags = {FAULTS[f]: True for f in args.fault}
    if args.unbounded_spawn:
        flags["unbounded_spawn"] = True
    if args.fine_grain:
        flags["fine_grain"] = True
    if args.config:
        cfg = load(args.config)
        overrides = {k: v for k, v in (("n_words", args.words), ("hom_lim", args.hom_lim)) if v is not None}
        if args.max_agents is not None:
            overrides["max_dynamic_agents"] = args.max_agents
        cfg = cfg.with_flags(**overrides, **flags) if overrides or flags else cfg
    elif args.fixture:
        cfg = FIXTURES[args.fixture](**flags)
        if args.hom_lim is not None:
            cfg = cfg.with_flags(hom_lim=args.hom_lim)
    else:
        params = SynthParams(
            n_instance=args.instances or 0,
            n_relation=args.relations or 0,
            n_rule=args.rules or 0,
            n_words=args.words,
            hom_lim=2 if args.hom_lim is None else args.hom_lim,
            max_dynamic_agents=16 if args.max_agents is None else args.max_agents,
        )
        cfg = build_synthetic(params, **flags)
    return cfg


def config_hash(cfg: SystemConfig) -> str:
    return cfg.digest()[:16]


# -- output --------------------------------------------------------------------------------


def out_dir(args) -> Path:
    d = Path(args.out or os.environ.get("MDA_OUT_DIR") or "mda_out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_json(path: Path, data) -> str:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return str(path)


def manifest(args, argv, cfg, verdicts: dict, files: dict, started: float, **extra) -> dict:
    limits = {k: getattr(args, k) for k in ("budget", "max_states", "max_depth") if getattr(args, k, None) is not None}
    data = {
        "command": ["mdacheck"] + list(argv),
        "tool_version": __version__,
        "config_hash": config_hash(cfg) if cfg is not None else None,
        "seeds": [args.seed] if getattr(args, "seed", None) is not None else [],
        "limits": limits,
        "verdicts": verdicts,
        "files": files,
        "wall_seconds": round(time.perf_counter() - started, 3),
    }
    data.update(extra)
    return data


# -- commands ------------------------------------------------------------------------------


def cmd_generate(args, argv) -> int:
    started = time.perf_counter()
    cfg = build_config(args)
    d = out_dir(args)
    path = Path(args.file) if args.file else d / "config.ini"
    save(cfg, path)
    print(f"wrote {path} ({cfg.name}: {cfg.n_instance} instance, {cfg.n_relation} relation, {cfg.n_rule} rule)")
    write_json(d / "manifest.json", manifest(args, argv, cfg, {"lint": "ok"}, {"config": str(path)}, started))
    return EXIT_OK


def cmd_simulate(args, argv) -> int:
    started = time.perf_counter()
    cfg = build_config(args)
    d = out_dir(args)
    trace, report = run_random(cfg, seed=args.seed, budget=args.budget)
    outcome = report.outcome
    if report.violated:
        outcome = VIOLATED
    files = {"config": str(d / "config.ini"), "trace": str(d / "trace.jsonl"), "report": str(d / "report.json")}
    save(cfg, files["config"])
    trace.dump(files["trace"])
    write_json(Path(files["report"]), report.to_dict())
    verdicts = {"run": report.outcome, "controller_monitor": VIOLATED if report.violated else HOLDS}
    write_json(d / "manifest.json", manifest(args, argv, cfg, verdicts, files, started, steps=report.steps))
    print(
        f"outcome={report.outcome} steps={report.steps} stop={report.stop_broadcast} "
        f"ledger_violations={report.ledger_violations}/{report.ledger_checks} hash={report.trace_hash}"
    )
    if report.diagnostic:
        print(f"  diagnosis: {report.diagnostic}")
    if report.violated:
        print(f"  controller broke at step {report.controller_violation_step} with agents active")
    return OUTCOME_EXIT[outcome]


def cmd_check(args, argv) -> int:
    started = time.perf_counter()
    cfg = build_config(args)
    d = out_dir(args)
    props = [PROPERTY_NAMES[p] for p in (args.property or list(PROPERTY_NAMES))]
    system = System(cfg)
    verdicts, files = {}, {"config": str(d / "config.ini")}
    save(cfg, files["config"])
    worst = HOLDS
    for prop in props:
        v, graph = verify(
            cfg,
            prop,
            max_states=args.max_states,
            max_depth=args.max_depth,
            hom_lim=args.hom_lim,
            reduce=not args.no_reduce,
        )
        path = None
        if v.counterexample is not None:
            path = write_counterexample(system, v, d / f"counterexample-{prop}.jsonl")
            files[f"counterexample_{prop}"] = path
        print(render(v, path))
        verdicts[prop] = v.to_dict()
        if prop == CONTROLLER_CORRECTNESS and graph.complete:
            for guard in GUARDS[1:]:
                variant = check_controller_correctness(graph, guard=guard)
                print(f"  variant {variant.name}: {variant.outcome}")
                verdicts[variant.name] = variant.to_dict()
        worst = max(worst, v.outcome, key=_RANK.__getitem__)
    write_json(d / "manifest.json", manifest(args, argv, cfg, verdicts, files, started))
    return OUTCOME_EXIT[worst]


_RANK = {HOLDS: 0, INCONCLUSIVE: 1, VIOLATED: 2}


def cmd_replay(args, argv) -> int:
    started = time.perf_counter()
    cfg = build_config(args)
    records = load_trace_records(args.trace)
    d = out_dir(args)
    try:
        g = replay(cfg, records)
    except ReplayDivergence as exc:
        print(str(exc))
        verdicts = {"replay": "Diverged", "step": exc.step}
        write_json(d / "manifest.json", manifest(args, argv, cfg, verdicts, {"trace": args.trace}, started))
        return EXIT_DIVERGED
    print(f"replayed {len(records)} events; final controller phase {g.agents[0].phase.name}")
    verdicts = {"replay": "Matches", "events": len(records)}
    write_json(d / "manifest.json", manifest(args, argv, cfg, verdicts, {"trace": args.trace}, started))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdacheck", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a linted configuration file")
    _add_config_args(p)
    p.add_argument("--file", help="config path (default: <out>/config.ini)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="one seeded random run")
    _add_config_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, help="step budget (default: from config)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="exhaustive exploration and property checks")
    _add_config_args(p)
    p.add_argument("--property", action="append", choices=sorted(PROPERTY_NAMES), help="repeatable; default all")
    p.add_argument("--max-states", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--no-reduce", action="store_true", help="expand every interleaving")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("replay", help="re-execute a recorded trace and compare every event")
    _add_config_args(p)
    p.add_argument("trace", help="trace file (JSON lines)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except (UsageError, ConfigError, OSError) as exc:
        print(f"mdacheck {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
