"""Command-line entry point.

Subcommands map one-to-one onto the experiment drivers:

  nts-lab rdf              --config FILE   rate-distortion points/curves
  nts-lab nts              --config FILE   adaptive codec sessions
  nts-lab sweep-redundancy --config FILE   rate overhead vs word length
  nts-lab explore          --config FILE   codebook model comparison
  nts-lab validate         --config FILE   parse and validate only

Exit codes: 0 success, 2 config error, 3 solver non-convergence,
4 internal synchronization failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .engine import SyncError
from .harness import (
    ConfigError,
    SolverError,
    emit_plot_script,
    parse_config,
    run_explore_compare,
    run_nts,
    run_rdf,
    run_redundancy_sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_SYNC = 4

_EPILOG = """\
Config documents are YAML with a mandatory `schema_version: 1` and a
`kind` of rdf_point, rdf_curve, nts_run, redundancy_sweep, or
explore_compare.  Defaults: distortion hamming; n_points 25 (curves);
generations 50; max_search_index 2**20 (1048576); n_words 1000 (sweeps);
update {kind: hard}; model {kind: iid}; tolerance 1e-9.  Unknown keys are
rejected.  The output directory is --out-dir, else $NTS_LAB_OUT_DIR,
else the current directory.
"""

_COMMANDS = {
    "rdf": (run_rdf, ("rdf_point", "rdf_curve")),
    "nts": (run_nts, ("nts_run",)),
    "sweep-redundancy": (run_redundancy_sweep, ("redundancy_sweep",)),
    "explore": (run_explore_compare, ("explore_compare",)),
    "validate": (None, None),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nts-lab",
        description="Rate-distortion and adaptive-codebook experiment runner.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "rdf": "solve rate-distortion points or curves",
        "nts": "run adaptive codec sessions over seeds",
        "sweep-redundancy": "measure rate overhead vs word length",
        "explore": "compare codebook sampling models",
        "validate": "parse and validate a config, run nothing",
    }
    for name in _COMMANDS:
        cmd = sub.add_parser(name, help=helps[name])
        cmd.add_argument(
            "--config", required=True, metavar="FILE",
            help="path to the YAML experiment document",
        )
        cmd.add_argument(
            "--out-dir", default=None, metavar="DIR",
            help="output directory (default: $NTS_LAB_OUT_DIR, else '.')",
        )
        cmd.add_argument(
            "--emit-plot-script", action="store_true",
            help="also write a gnuplot script referencing the CSV outputs",
        )
        cmd.add_argument(
            "--jobs", type=int, default=1, metavar="N",
            help="max concurrent seeds (default 1)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = parse_config(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    runner, kinds = _COMMANDS[args.command]
    if args.command == "validate":
        print(f"config ok: kind={config.kind}")
        return EXIT_OK
    if config.kind not in kinds:
        print(
            f"config error: kind {config.kind!r} does not belong to "
            f"'{args.command}' (expected one of {', '.join(kinds)})",
            file=sys.stderr,
        )
        return EXIT_CONFIG

    out_dir = args.out_dir or os.environ.get("NTS_LAB_OUT_DIR") or "."
    try:
        runner(config, out_dir, jobs=max(1, args.jobs))
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SyncError as exc:
        print(f"sync failure: {exc}", file=sys.stderr)
        return EXIT_SYNC
    if args.emit_plot_script:
        emit_plot_script(config, out_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
