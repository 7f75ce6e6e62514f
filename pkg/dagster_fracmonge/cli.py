"""Command line entry point: `fracmonge --config experiment.toml`.

Exit status is 0 when every asserted criterion passes, 1 when one fails,
2 for configuration errors and 3 when a suite fails numerically.
"""

import argparse
import logging
import sys
import typing as t
from pathlib import Path

from dagster_fracmonge.config import ALL_SUITES, ConfigError, ExperimentConfig, load_experiment_config
from dagster_fracmonge.controller import (
    EXIT_CONFIG_ERROR,
    DagsterExperimentController,
    ExperimentController,
    ExperimentRun,
)
from dagster_fracmonge.events import EventRecorder
from dagster_fracmonge.scheduler import SUITE_DEPENDENCIES

logger = logging.getLogger(__name__)

CONTROLLERS: dict[str, type[ExperimentController]] = {
    "dagster": DagsterExperimentController,
    "local": ExperimentController,
}


def _suite_list(value: str) -> list[str]:
    return [name.strip() for name in value.split(",") if name.strip()]


def _seed(value: str) -> int:
    seed = int(value, 0)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64 bit integer, got {value}")
    return seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracmonge",
        description="Run fractional linearized Monge-Ampere experiment suites.",
    )
    parser.add_argument("--config", type=Path, default=None, help="experiment TOML file (default: built-in defaults)")
    parser.add_argument("--out", type=str, default=None, help="output directory, overrides [run] output_dir")
    parser.add_argument(
        "--suite",
        type=_suite_list,
        default=None,
        help="comma separated suites to run, overrides [run] suites; an empty value runs nothing",
    )
    parser.add_argument("--seed", type=_seed, default=None, help="random seed, overrides [run] seed")
    parser.add_argument("--list-suites", action="store_true", help="print the suites and their upstream suites")
    parser.add_argument(
        "--runner",
        choices=sorted(CONTROLLERS),
        default="dagster",
        help="materialize suites as dagster assets or run them directly (default: dagster)",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def list_suites() -> str:
    lines = []
    for suite in ALL_SUITES:
        upstream = ", ".join(SUITE_DEPENDENCIES[suite]) or "-"
        lines.append(f"{suite:<14}{upstream}")
    return "\n".join(lines)


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig() if args.config is None else load_experiment_config(args.config)
    return config.with_overrides(output_dir=args.out, suites=args.suite, seed=args.seed)


def report(run: ExperimentRun) -> str:
    lines = [f"{'criterion':<10}{'status':<9}{'suite':<14}measured"]
    for criterion in run.criteria():
        label = criterion.criterion_id if criterion.asserted else f"{criterion.criterion_id}*"
        lines.append(f"{label:<10}{criterion.status:<9}{criterion.suite:<14}{criterion.measured:.3e}")
    for suite, failure in run.failures.items():
        lines.append(f"suite {suite} failed: {failure}")
    lines.append("* reported only, does not affect the exit status")
    return "\n".join(lines)


def main(argv: t.Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.DEBUG if args.verbose else logging.INFO)

    if args.list_suites:
        print(list_suites())
        return 0

    try:
        config = resolve_config(args)
    except ConfigError as e:
        print(f"[error] {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    controller = CONTROLLERS[args.runner].setup_with_config(config=config)
    controller.add_event_handler(EventRecorder(enable_progress_logging=args.verbose))
    try:
        run = controller.run()
    except ConfigError as e:
        print(f"[error] {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    print(report(run))
    for suite, failure in run.failures.items():
        print(f"[error] numerical failure in suite {suite}: {failure}", file=sys.stderr)
    return run.exit_status


if __name__ == "__main__":
    sys.exit(main())
