"""Command-line entry point for running experiment sweeps.

Exit status is 0 only when every requested run completed; configuration
errors and failed runs exit nonzero with a diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import sys

from .errors import PilotSimError
from .experiments import (
    PRESETS,
    format_table,
    get_preset,
    load_config,
    run_experiment,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pilotsim",
        description="Simulate pilot-based execution strategies for "
                    "multi-task workloads and report TTC breakdowns.",
    )
    parser.add_argument(
        "config", nargs="?", default=None,
        help="YAML experiment configuration (omit when using --preset)",
    )
    parser.add_argument(
        "--preset", choices=PRESETS, default=None,
        help="run one of the built-in experiment sweeps",
    )
    parser.add_argument(
        "--ideal", action="store_true",
        help="with --preset: zero waits and overheads (baseline conditions)",
    )
    parser.add_argument("--seed", type=int, default=None,
                        help="override the base random seed")
    parser.add_argument("--repeats", type=int, default=None,
                        help="override the number of repeats per size")
    parser.add_argument("--out", default=None, metavar="DIR",
                        help="write runs.csv, aggregates.json and "
                             "p_es_table.json to this directory")
    parser.add_argument("--validate", action="store_true",
                        help="check the configuration and exit")
    parser.add_argument(
        "--serve", action="store_true",
        help="serve the task-submission endpoint instead of running a sweep",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.serve:
        import uvicorn

        from .bridge import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    if (args.config is None) == (args.preset is None):
        parser.error("give exactly one of: a config file, or --preset")

    try:
        if args.preset is not None:
            cfg = get_preset(args.preset, ideal=args.ideal)
        else:
            cfg = load_config(args.config)
        if args.seed is not None or args.repeats is not None:
            from dataclasses import replace
            overrides = {}
            if args.seed is not None:
                overrides["seed"] = args.seed
            if args.repeats is not None:
                overrides["repeats"] = args.repeats
            cfg = replace(cfg, **overrides)
    except (PilotSimError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.validate:
        print(f"configuration {cfg.name!r} is valid "
              f"({len(cfg.sites)} sites, sizes {list(cfg.sizes)})")
        return 0

    try:
        result = run_experiment(cfg, out_dir=args.out)
    except PilotSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(format_table(result))
    if args.out:
        print(f"results written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
