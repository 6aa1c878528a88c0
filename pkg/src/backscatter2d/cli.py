"""Command-line entry point.

    backscatter2d <experiment> [--config PATH] [--out DIR] [--threads N]
                               [--seed U64]
    backscatter2d cache (stats | clear) [--config PATH]

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 experiment verdict FAIL.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .cache import SolutionCache
from .config import EXPERIMENTS, ExperimentConfig
from .errors import ConfigError, NumericalError, VerdictFailure
from .experiments import run

logger = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="backscatter2d",
        description="2D backscattering workbench: forward solver, Born "
        "approximation, cubic-term quadrature, regularity estimation",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--threads", type=int, help="worker threads")
        p.add_argument("--seed", type=int, help="seed for randomized batteries")
        if name == "cache":
            p.add_argument(
                "action", choices=("stats", "clear"), nargs="?", default="stats"
            )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = (
            ExperimentConfig.from_file(args.config)
            if args.config
            else ExperimentConfig()
        )
        overrides = {"experiment": args.experiment}
        if args.out is not None:
            overrides["out_dir"] = args.out
        if args.threads is not None:
            overrides["threads"] = args.threads
        if args.seed is not None:
            overrides["seed"] = args.seed
        cfg = cfg.with_overrides(**overrides)

        if args.experiment == "cache":
            if not cfg.cache_dir:
                raise ConfigError("set cache_dir in the config to use the cache")
            cache = SolutionCache(cfg.cache_dir)
            if args.action == "clear":
                removed = cache.clear()
                print(f"removed {removed} cache files")
            else:
                print(json.dumps(cache.stats(), indent=2))
            return 0

        cfg.validate()
        report = run(cfg)
        print(f"{report.experiment}: {report.verdict}")
        for key, val in report.summary.items():
            print(f"  {key} = {val}")
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except VerdictFailure as exc:
        print(f"verdict FAIL: {exc}", file=sys.stderr)
        return 4
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
