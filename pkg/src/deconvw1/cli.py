"""Command-line front end.

Usage: ``deconv-w1 <task> --config cfg.json [--seed S] [--out DIR]``

Exit codes: 0 on success (and verification pass), 2 when a verification
task reports failure, 1 on error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, DeconvError
from .experiments import TASK_RUNNERS, ExperimentConfig, run_task

_VERIFY_TASKS = ("verify-inversion", "verify-approx", "lowerbound-family")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deconv-w1",
        description="Deconvolution benchmarks and verifiers under the "
                    "L1-Wasserstein metric",
    )
    parser.add_argument("task", choices=sorted(TASK_RUNNERS))
    parser.add_argument("--config", required=True, help="experiment config JSON")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out", default=None, help="override output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        raw["task"] = args.task
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.out is not None:
            raw["output_dir"] = args.out
        cfg = ExperimentConfig.from_json(raw)
        result = run_task(cfg)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DeconvError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(result, indent=2, default=str))
    if args.task in _VERIFY_TASKS and not result.get("pass", True):
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
