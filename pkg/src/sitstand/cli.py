"""Command-line entry point.

Exit codes: 0 success, 1 run finished without completing the rise,
2 configuration error, 3 malformed trace or log, 4 too little calibration
data, 64 bad command-line usage.  Failures print one line to stderr of the
form ``error: <kind>: <reason>``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .calibration import InsufficientData
from .harness import (
    ConfigError,
    RunConfig,
    batch,
    calibrate_cmd,
    export_plots,
    replay,
    run,
    write_corpus,
)
from .human_sim import SCENARIO_KINDS, shipped_scenario
from .traces import TraceFormatError

EXIT_OK = 0
EXIT_NOT_COMPLETED = 1
EXIT_CONFIG = 2
EXIT_TRACE = 3
EXIT_DATA = 4
EXIT_USAGE = 64

_ERRORS = (
    (ConfigError, EXIT_CONFIG, "config"),
    (TraceFormatError, EXIT_TRACE, "trace"),
    (InsufficientData, EXIT_DATA, "insufficient-data"),
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _one_line(msg: str) -> str:
    return " ".join(str(msg).split())


def _seeds(text: str) -> list[int]:
    """``7``, ``0:20`` (half-open) or ``1,4,9``."""
    try:
        if ":" in text:
            a, b = text.split(":")
            return list(range(int(a), int(b)))
        return [int(s) for s in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "scenario", None):
        from dataclasses import replace
        cfg = replace(cfg, scenario=shipped_scenario(args.scenario, cfg.seed), trace_path=None)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "out", None):
        from dataclasses import replace
        cfg = replace(cfg, output_dir=Path(args.out))
    return cfg


def _print_report(r) -> int:
    print(json.dumps(r.to_dict(), indent=2))
    return EXIT_OK if r.success else EXIT_NOT_COMPLETED


def cmd_run(args) -> int:
    return _print_report(run(_load(args)))


def cmd_replay(args) -> int:
    cfg = _load(args)
    return _print_report(replay(args.trace, cfg))


def cmd_calibrate(args) -> int:
    _, summary = calibrate_cmd(args.corpus, args.output, base_path=args.base)
    print(summary)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_export(args) -> int:
    for p in export_plots(args.log, args.out):
        print(p)
    return EXIT_OK


def cmd_batch(args) -> int:
    cfg = _load(args)
    rows = batch(cfg, args.scenarios, args.seeds, args.out, jobs=args.jobs)
    for r in rows:
        print(f"{r['scenario']:<17} seed={r['seed']:<4} {r['status']:<10} {r['modes']} "
              f"peak_Fhy={r['peak_Fhy']:.1f}")
    print(f"wrote {Path(args.out) / 'batch_summary.csv'}")
    return EXIT_OK


def cmd_generate(args) -> int:
    for p in write_corpus(args.out, args.n, seed0=args.seed):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sitstand", description="Fuzzy-supervised sit-to-stand assistance simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_required=False):
        sp.add_argument("-c", "--config", type=Path, help="run configuration (JSON)")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("-o", "--out", type=Path, required=out_required, help="output directory")

    sp = sub.add_parser("run", help="closed-loop run against the simulated subject, or replay the configured trace")
    common(sp)
    sp.add_argument("--scenario", choices=SCENARIO_KINDS, help="use a shipped scenario")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("replay", help="open-loop run from the sensor columns of a trace or log")
    sp.add_argument("trace", type=Path)
    common(sp)
    sp.set_defaults(func=cmd_replay)

    sp = sub.add_parser("calibrate", help="fit membership functions to a labelled corpus")
    sp.add_argument("corpus", type=Path, help="directory of labelled trace CSVs")
    sp.add_argument("-o", "--output", type=Path, required=True, help="fuzzy config to write")
    sp.add_argument("--base", type=Path, help="config whose rules and fixed terms are kept")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("export-plots", help="tidy per-figure CSVs from a run log")
    sp.add_argument("log", type=Path)
    sp.add_argument("-o", "--out", type=Path, required=True)
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("batch", help="many scenario/seed runs in parallel")
    common(sp, out_required=True)
    sp.add_argument("--scenarios", type=lambda s: s.split(","), default=list(SCENARIO_KINDS))
    sp.add_argument("--seeds", type=_seeds, default=list(range(5)))
    sp.add_argument("-j", "--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_batch)

    sp = sub.add_parser("generate", help="write a labelled human-assisted corpus")
    sp.add_argument("-o", "--out", type=Path, required=True)
    sp.add_argument("-n", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0, help="first seed")
    sp.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: usage: {_one_line(exc)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: usage: {_one_line(exc)}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        for cls, code, kind in _ERRORS:
            if isinstance(exc, cls):
                print(f"error: {kind}: {_one_line(exc)}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
