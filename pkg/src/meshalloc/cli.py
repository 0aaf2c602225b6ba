"""Command-line driver: trace replay, workload generation, analysis experiments.

Exit status: 0 success, 1 validation/usage error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from meshalloc import analysis
from meshalloc.core import Config, Rng, load_config
from meshalloc.errors import InvariantViolation
from meshalloc.trace import STRING_CHURN_DEFAULTS, TraceError, format_trace, parse_trace, \
    replay, string_churn


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, help="root RNG seed")
    p.add_argument("--no-randomization", action="store_true",
                   help="ascending offsets, no shuffle on free")
    p.add_argument("--no-meshing", action="store_true")
    p.add_argument("--mesh-period", type=int, metavar="EVENTS")
    p.add_argument("--t", type=int, dest="probes", metavar="PROBES",
                   help="SplitMesher probe budget")


def build_parser():
    parser = _Parser(prog="meshalloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("replay", help="replay an allocation trace")
    p.add_argument("trace", help="trace file, or - for stdin")
    p.add_argument("--csv", help="stats CSV output (default: none)")
    p.add_argument("--mesh-log", help="per-cycle mesh report CSV")
    p.add_argument("--check", action="store_true",
                   help="verify heap invariants after every event")
    _common(p)

    p = sub.add_parser("gen", help="generate a synthetic trace")
    p.add_argument("workload", choices=["string_churn"])
    p.add_argument("--rounds", type=int, default=STRING_CHURN_DEFAULTS["rounds"])
    p.add_argument("--count", type=int, default=STRING_CHURN_DEFAULTS["count_per_round"])
    p.add_argument("--start-len", type=int, default=STRING_CHURN_DEFAULTS["start_len"])
    p.add_argument("--keep", type=float, default=STRING_CHURN_DEFAULTS["keep_fraction"])
    p.add_argument("--budget", type=int, default=STRING_CHURN_DEFAULTS["live_budget"],
                   help="cap on live string bytes")
    p.add_argument("--out", help="output file (default: stdout)")
    _common(p)

    p = sub.add_parser("experiment", help="run an analysis experiment")
    p.add_argument("name", help="one of: " + ", ".join(analysis.EXPERIMENTS))
    p.add_argument("--csv", help="output CSV (default: stdout)")
    p.add_argument("--trials", type=int)
    p.add_argument("--model", choices=["constant", "independent"], default="constant",
                   help="span model for the convergence experiment")
    _common(p)
    return parser


def make_config(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    if args.seed is not None:
        cfg.rng_seed = args.seed
    if args.no_randomization:
        cfg.randomize = False
    if args.no_meshing:
        cfg.meshing = False
    if args.mesh_period is not None:
        cfg.mesh_period_events = args.mesh_period
    if args.probes is not None:
        cfg.splitmesher_t = args.probes
    cfg.__post_init__()
    return cfg


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def cmd_replay(args, cfg):
    text = sys.stdin.read() if args.trace == "-" else Path(args.trace).read_text()
    events = parse_trace(text)
    csv_out, close_csv = (_open_out(args.csv) if args.csv else (None, False))
    mesh_out, close_mesh = (_open_out(args.mesh_log) if args.mesh_log else (None, False))
    try:
        summary = replay(events, cfg, csv_out=csv_out, mesh_out=mesh_out,
                         check_invariants=args.check)
    finally:
        if close_csv:
            csv_out.close()
        if close_mesh:
            mesh_out.close()
    stream = sys.stderr if args.csv == "-" or args.mesh_log == "-" else sys.stdout
    print(json.dumps(summary.as_dict(), sort_keys=True), file=stream)


def cmd_gen(args, cfg):
    events = string_churn(args.rounds, args.count, args.start_len, args.keep,
                          Rng(cfg.rng_seed), live_budget=args.budget)
    out, close = _open_out(args.out)
    try:
        out.write(format_trace(events))
    finally:
        if close:
            out.close()


def cmd_experiment(args, cfg):
    if args.name not in analysis.EXPERIMENTS:
        raise UsageError(f"unknown experiment {args.name!r}; choose from "
                         + ", ".join(analysis.EXPERIMENTS))
    func, header = analysis.EXPERIMENTS[args.name]
    kw = {"rng": Rng(cfg.rng_seed)}
    if args.trials is not None:
        kw["trials" if args.name != "triangles" else "samples"] = args.trials
    if args.name == "convergence":
        kw["model"] = args.model
    rows = func(**kw)
    out, close = _open_out(args.csv)
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if close:
            out.close()


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = make_config(args)
        {"replay": cmd_replay, "gen": cmd_gen, "experiment": cmd_experiment}[args.command](
            args, cfg)
    except (UsageError, TraceError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
