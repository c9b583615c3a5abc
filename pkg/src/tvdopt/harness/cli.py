"""Command-line entry point: ``tvdopt {run,check-topology,consensus-bench,parse}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiment import ConfigError, build_topology, consensus_bench, load_config, run_experiment
from .libsvm import LibsvmParseError, parse_libsvm

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ALL_FAILED = 2
EXIT_PARSE = 3


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    result = run_experiment(cfg, output=args.output)
    for mid, info in result.manifest["methods"].items():
        if info["status"] == "ok":
            print(f"{mid}: comms={info['total_comms']} final_fgap={info['final_fgap']:.3e}")
        else:
            print(f"{mid}: FAILED {info['error']}")
    print(f"wrote {result.csv_path} and {result.manifest_path}")
    return EXIT_ALL_FAILED if result.all_failed else EXIT_OK


def _cmd_check_topology(args) -> int:
    from ..topology import verify_assumption

    cfg = load_config(args.config)
    schedule = build_topology(cfg.topology, cfg)
    horizon = args.horizon or cfg.topology.get("horizon")
    report = verify_assumption(schedule, schedule.B, horizon)
    print(json.dumps({"schedule": schedule.describe(), **report.summary()}, indent=2))
    return EXIT_OK if report.passed else EXIT_ALL_FAILED


def _cmd_consensus_bench(args) -> int:
    cfg = load_config(args.config)
    curve = consensus_bench(cfg, rounds=args.rounds, d=args.dim)
    print("round,dist_to_consensus,bound")
    for r, dist, bound in curve:
        print(f"{r},{dist!r},{bound!r}")
    return EXIT_OK


def _cmd_parse(args) -> int:
    ds = parse_libsvm(args.file)
    print(json.dumps({"m": ds.m, "dim": ds.dim, "labels": list(ds.label_set)}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvdopt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config and write metrics CSV + manifest")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="override the config's output path")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("check-topology", help="verify the mixing-matrix assumptions")
    p.add_argument("config")
    p.add_argument("--horizon", type=int)
    p.set_defaults(func=_cmd_check_topology)

    p = sub.add_parser("consensus-bench", help="print the gossip decay curve")
    p.add_argument("config")
    p.add_argument("--rounds", type=int)
    p.add_argument("--dim", type=int, default=1)
    p.set_defaults(func=_cmd_consensus_bench)

    p = sub.add_parser("parse", help="validate a LibSVM file")
    p.add_argument("file")
    p.set_defaults(func=_cmd_parse)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LibsvmParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if args.command != "parse" else EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
