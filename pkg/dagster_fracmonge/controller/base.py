import logging
import typing as t
from dataclasses import dataclass, field
from pathlib import Path

from dagster_fracmonge.artifacts import write_summary
from dagster_fracmonge.config import ExperimentConfig
from dagster_fracmonge.console import EventConsole, SuiteEventHandler
from dagster_fracmonge.resource import NUMERICAL_ERRORS, SuiteFailedError
from dagster_fracmonge.scheduler import SuiteScheduler
from dagster_fracmonge.suites import CRITERIA, SuiteRunner
from dagster_fracmonge.types import CriterionResult, SuiteName, SuiteResult

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CRITERION_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3


@dataclass(kw_only=True)
class ExperimentRun:
    """The outcome of running a set of suites."""

    requested: list[SuiteName]
    order: list[SuiteName]
    results: dict[str, SuiteResult] = field(default_factory=lambda: {})
    failures: dict[str, SuiteFailedError] = field(default_factory=lambda: {})
    summary_path: Path | None = None

    def criteria(self) -> list[CriterionResult]:
        """Every criterion in criterion order. Criteria whose suite did not
        produce them are SKIPPED with the reason in the description."""
        out: list[CriterionResult] = []
        for criterion_id, spec in CRITERIA.items():
            result = self.results.get(spec.suite)
            found = None
            if result is not None:
                found = next((c for c in result.criteria if c.criterion_id == criterion_id), None)
            if found is not None:
                out.append(found)
                continue
            if spec.suite in self.failures:
                reason = f"suite {spec.suite} failed"
            else:
                reason = f"suite {spec.suite} not run"
            skipped = CriterionResult.skipped(criterion_id, spec.suite, asserted=spec.asserted, description=reason)
            skipped.threshold = spec.threshold
            out.append(skipped)
        return out

    @property
    def failed_criteria(self) -> list[CriterionResult]:
        return [c for c in self.criteria() if c.failed]

    @property
    def exit_status(self) -> int:
        if self.failures:
            return EXIT_NUMERICAL_FAILURE
        if self.failed_criteria:
            return EXIT_CRITERION_FAILED
        return EXIT_OK

    def raise_for_failures(self) -> None:
        if not self.failures:
            return
        names = ", ".join(self.failures)
        errors = [e for failure in self.failures.values() for e in [failure, *failure.errors]]
        first = next(iter(self.failures.values()))
        raise SuiteFailedError(first.suite, f"suites failed: {names}", errors)


class ExperimentController:
    """Runs the suites of one experiment in dependency order, in process.

    Downstream suites of a failed suite are not run. Use `setup_with_config`
    rather than the constructor.
    """

    @classmethod
    def setup_with_config(
        cls,
        *,
        config: ExperimentConfig,
        output_dir: str | Path | None = None,
        log_override: logging.Logger | None = None,
    ) -> t.Self:
        console = EventConsole(log_override=log_override)
        controller = cls(
            config=config,
            console=console,
            output_dir=output_dir,
            log_override=log_override,
        )
        return controller

    def __init__(
        self,
        config: ExperimentConfig,
        console: EventConsole,
        output_dir: str | Path | None = None,
        log_override: logging.Logger | None = None,
        scheduler: SuiteScheduler | None = None,
    ) -> None:
        self.config = config
        self.console = console
        self.output_dir = Path(output_dir if output_dir is not None else config.run.output_dir)
        self.logger = log_override or logger
        self.scheduler = scheduler or SuiteScheduler()

    def set_logger(self, logger: logging.Logger) -> None:
        self.logger = logger

    def add_event_handler(self, handler: SuiteEventHandler) -> str:
        handler_id: str = self.console.add_handler(handler)
        return handler_id

    def remove_event_handler(self, handler_id: str) -> None:
        self.console.remove_handler(handler_id)

    def run(self, suites: t.Sequence[SuiteName] | None = None) -> ExperimentRun:
        """Runs the requested suites (default: the configured ones) and
        writes summary.csv."""
        requested = list(self.config.run.suites if suites is None else suites)
        order = self.scheduler.order(requested)
        run = ExperimentRun(requested=requested, order=order)
        self.logger.info(f"running suites: {', '.join(order) or 'none'}")
        self.execute(run)
        run.summary_path = write_summary(self.output_dir, run.criteria())
        self.logger.info(f"wrote {run.summary_path} exit status {run.exit_status}")
        return run

    def execute(self, run: ExperimentRun) -> None:
        runner = SuiteRunner(self.config, console=self.console, output_dir=self.output_dir)
        for suite in run.order:
            blocked = [name for name in self.scheduler.upstream(suite) if name in run.failures]
            if blocked:
                run.failures[suite] = SuiteFailedError(suite, f"upstream suites failed: {', '.join(blocked)}", [])
                self.logger.warning(f"skipping suite {suite}, upstream failed: {', '.join(blocked)}")
                continue
            upstream = {name: run.results[name] for name in self.scheduler.upstream(suite)}
            try:
                run.results[suite] = runner.run(suite, upstream)
            except NUMERICAL_ERRORS as e:
                self.logger.error(f"suite {suite} failed: {e}")
                run.failures[suite] = SuiteFailedError(suite, f"suite {suite} failed: {e}", [e])
