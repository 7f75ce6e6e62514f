import logging

from dagster_fracmonge import console
from dagster_fracmonge.types import CriterionResult

logger = logging.getLogger(__name__)


class EventRecorder:
    """Logs every suite event and keeps them for later inspection."""

    def __init__(
        self,
        log_override: logging.Logger | None = None,
        enable_progress_logging: bool = True,
    ):
        self.logger = log_override or logger
        self.events: list[console.SuiteEvent] = []
        self.criteria: list[CriterionResult] = []
        self.artifacts: list[str] = []
        self.failures: dict[str, Exception] = {}
        self._enable_progress_logging = enable_progress_logging

    def __call__(self, event: console.SuiteEvent) -> None:
        self.events.append(event)
        match event:
            case console.SuiteStarted(suite=suite, upstream=upstream):
                self.logger.info(f"suite {suite} started")
                if upstream:
                    self.logger.debug(f"suite {suite} upstream: {', '.join(upstream)}")
            case console.SuiteProgress(suite=suite, message=message, data=data):
                if self._enable_progress_logging:
                    self.logger.debug(f"{suite}: {message} {data}")
            case console.CriterionEvaluated(criterion=criterion):
                self.criteria.append(criterion)
                level = logging.WARNING if criterion.failed else logging.INFO
                asserted = "" if criterion.asserted else " (reported)"
                self.logger.log(
                    level,
                    f"{criterion.criterion_id}{asserted}: {criterion.status} "
                    f"measured={criterion.measured:.3e} threshold={criterion.threshold:.3e}",
                )
            case console.ArtifactWritten(suite=suite, path=path, kind=kind):
                self.artifacts.append(path)
                self.logger.debug(f"{suite}: wrote {kind} {path}")
            case console.SuiteFailed(suite=suite, error=error):
                self.failures[suite] = error
                self.logger.error(f"suite {suite} failed: {error}")
            case console.SuiteCompleted(suite=suite, duration_ms=duration_ms):
                if duration_ms is None:
                    self.logger.info(f"suite {suite} completed")
                else:
                    self.logger.info(f"suite {suite} completed in {duration_ms:.0f} ms")
            case _:
                self.logger.debug(f"Unhandled event {event.__class__.__name__}")
