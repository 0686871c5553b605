"""Command-line entry point."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import load_config
from .errors import ConfigError
from .experiment import run_experiment
from .selfcheck import run_selfcheck


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nomapfs",
        description="Proportional-fair NOMA scheduling: simulation sweeps and analytical rate estimation.",
    )
    parser.add_argument("--mode", choices=["sim", "estimate", "both", "selfcheck"], default="both",
                        help="run simulations, the analytical estimator, both, or the verification suites")
    parser.add_argument("--config", help="experiment config file (key = value lines)")
    parser.add_argument("--out", help="output directory for results.csv / deviations.csv / manifest.json")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--workers", type=int, default=1, help="parallel worker processes for sweep cells")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.mode == "selfcheck":
        return run_selfcheck()
    if not args.config or not args.out:
        print("error: --config and --out are required unless --mode selfcheck", file=sys.stderr)
        return 2
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    try:
        cells = run_experiment(config, args.out, mode=args.mode, workers=args.workers)
    except Exception as exc:  # surface a diagnostic, nonzero exit
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    failed = sum(1 for c in cells if c.status != "ok")
    print(f"wrote {len(cells)} result rows to {args.out}"
          + (f" ({failed} cells flagged in status column)" if failed else ""))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
