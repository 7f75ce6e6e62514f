import logging
import typing as t
from pathlib import Path

import dagster as dg
import numpy as np

from dagster_fracmonge import console
from dagster_fracmonge.config import ExperimentConfig
from dagster_fracmonge.suites import SuiteRunner, criteria_for
from dagster_fracmonge.types import CriterionResult, FracMongeError, SuiteName, SuiteResult

if t.TYPE_CHECKING:
    from dagster_fracmonge.translator import SuiteTranslator

logger = logging.getLogger(__name__)


class SuiteEventLogContext:
    def __init__(
        self,
        handler: "DagsterSuiteEventHandler",
        event: console.SuiteEvent,
    ):
        self._handler = handler
        self._event = event

    def ensure_standard_obj(self, obj: dict[str, t.Any] | None) -> dict[str, t.Any]:
        obj = obj or {}
        obj["_event_type"] = self.event_name
        obj["_suite"] = self._event.suite
        return obj

    def info(self, message: str, obj: dict[str, t.Any] | None = None) -> None:
        self.log(logging.INFO, message, obj)

    def debug(self, message: str, obj: dict[str, t.Any] | None = None) -> None:
        self.log(logging.DEBUG, message, obj)

    def warning(self, message: str, obj: dict[str, t.Any] | None = None) -> None:
        self.log(logging.WARNING, message, obj)

    def error(self, message: str, obj: dict[str, t.Any] | None = None) -> None:
        self.log(logging.ERROR, message, obj)

    def log(self, level: int, message: str, obj: dict[str, t.Any] | None) -> None:
        self._handler.log(level, message, self.ensure_standard_obj(obj))

    @property
    def event_name(self) -> str:
        return self._event.__class__.__name__


# failures recorded against a suite, anything else propagates
NUMERICAL_ERRORS: tuple[type[Exception], ...] = (FracMongeError, np.linalg.LinAlgError, ArithmeticError)


class SuiteFailedError(FracMongeError):
    def __init__(self, suite: str, message: str, errors: list[Exception]) -> None:
        super().__init__(message)
        self.suite = suite
        self.errors = errors


class DagsterSuiteEventHandler:
    def __init__(
        self,
        context: dg.AssetExecutionContext,
        suite: SuiteName,
        translator: "SuiteTranslator",
    ) -> None:
        """Dagster event handler for one suite.

        The handler is responsible for reporting suite events to dagster and
        for turning the evaluated criteria into asset check results.

        Args:
            context: The Dagster asset execution context.
            suite: The suite materialized by the asset.
            translator: The translator naming assets and checks.
        """
        self._context = context
        self._logger = context.log
        self._suite = suite
        self._translator = translator
        self._criteria: dict[str, CriterionResult] = {}
        self._errors: list[Exception] = []

    def process_events(self, event: console.SuiteEvent) -> None:
        self.report_event(event)

    def report_event(self, event: console.SuiteEvent) -> None:
        log_context = self.log_context(event)

        match event:
            case console.SuiteStarted(upstream=upstream):
                log_context.info("Suite started", {"upstream": list(upstream)})
            case console.SuiteProgress(message=message, data=data):
                log_context.debug(message, dict(data))
            case console.CriterionEvaluated(criterion=criterion):
                self._criteria[criterion.criterion_id] = criterion
                obj = {
                    "criterion": criterion.criterion_id,
                    "status": criterion.status,
                    "asserted": criterion.asserted,
                    "measured": criterion.measured,
                    "threshold": criterion.threshold,
                }
                if criterion.failed:
                    log_context.warning("Criterion failed", obj)
                else:
                    log_context.info("Criterion evaluated", obj)
            case console.ArtifactWritten(path=path, kind=kind):
                log_context.debug("Artifact written", {"path": path, "kind": kind})
            case console.SuiteFailed(error=error):
                log_context.error(f"suite {self._suite} failed: {error}")
                self._errors.append(error)
            case console.SuiteCompleted(result=result, duration_ms=duration_ms):
                log_context.info(
                    "Suite completed",
                    {"rows": len(result.rows), "artifacts": len(result.artifacts), "duration_ms": duration_ms},
                )
            case _:
                log_context.debug("Received event")

    def check_results(self) -> t.Iterator[dg.AssetCheckResult]:
        """One check result per criterion owned by the suite, in criterion
        order. A criterion the suite never evaluated is reported as skipped."""
        asset_key = self._translator.get_asset_key(self._suite)
        for spec in criteria_for(self._suite):
            criterion = self._criteria.get(spec.criterion_id)
            if criterion is None:
                criterion = CriterionResult.skipped(spec.criterion_id, self._suite, asserted=spec.asserted)
            severity = dg.AssetCheckSeverity.ERROR if criterion.asserted else dg.AssetCheckSeverity.WARN
            yield dg.AssetCheckResult(
                asset_key=asset_key,
                check_name=self._translator.get_check_name(spec.criterion_id),
                passed=criterion.status != "FAIL",
                severity=severity,
                metadata={
                    "status": criterion.status,
                    "asserted": criterion.asserted,
                    "measured": criterion.measured,
                    "threshold": criterion.threshold,
                    "description": criterion.description,
                },
            )

    def log_context(self, event: console.SuiteEvent) -> SuiteEventLogContext:
        return SuiteEventLogContext(self, event)

    def log(
        self,
        level: int,
        message: str,
        obj: dict[str, t.Any] | None = None,
    ) -> None:
        if level == logging.ERROR:
            self._logger.error(message)
            return

        obj = obj or {}
        final_obj = obj.copy()
        final_obj["message"] = message
        self._logger.log(level, str(final_obj))

    @property
    def criteria(self) -> list[CriterionResult]:
        return list(self._criteria.values())

    @property
    def errors(self) -> list[Exception]:
        return self._errors[:]


class ExperimentResource(dg.ConfigurableResource):
    """Runs suites for one experiment. The config travels as JSON so the
    resource stays a plain dagster config object."""

    config_json: str
    output_dir: str | None = None

    @classmethod
    def from_config(cls, config: ExperimentConfig, output_dir: str | Path | None = None) -> "ExperimentResource":
        return cls(
            config_json=config.model_dump_json(),
            output_dir=None if output_dir is None else str(output_dir),
        )

    def experiment_config(self) -> ExperimentConfig:
        return ExperimentConfig.model_validate_json(self.config_json)

    def run(
        self,
        context: dg.AssetExecutionContext,
        *,
        suite: SuiteName,
        upstream: t.Mapping[str, SuiteResult],
        translator: "SuiteTranslator",
    ) -> t.Iterator[dg.Output[SuiteResult] | dg.AssetCheckResult]:
        """Execute one suite and report it as an output followed by its
        asset check results"""
        log = context.log
        event_handler = self.create_event_handler(context=context, suite=suite, translator=translator)
        event_console = console.EventConsole(log_override=logger)
        event_console.add_handler(event_handler.process_events)
        runner = SuiteRunner(self.experiment_config(), console=event_console, output_dir=self.output_dir)

        try:
            result = runner.run(suite, upstream)
        except NUMERICAL_ERRORS as e:
            log.error(f"suite {suite} raised {e.__class__.__name__}: {e}")
            raise SuiteFailedError(
                suite,
                f"suite {suite} failed with {len(event_handler.errors)} errors: {e}",
                [*event_handler.errors],
            ) from e

        yield dg.Output(
            result,
            metadata={
                "rows": len(result.rows),
                "artifacts": len(result.artifacts),
                "criteria": ", ".join(f"{c.criterion_id}={c.status}" for c in result.criteria),
            },
        )
        yield from event_handler.check_results()
        log.debug(f"suite {suite} reported {len(event_handler.criteria)} criteria")

    def create_event_handler(
        self,
        *,
        context: dg.AssetExecutionContext,
        suite: SuiteName,
        translator: "SuiteTranslator",
    ) -> DagsterSuiteEventHandler:
        return DagsterSuiteEventHandler(context=context, suite=suite, translator=translator)
