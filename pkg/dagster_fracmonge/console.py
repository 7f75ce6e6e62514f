import logging
import typing as t
import uuid
from dataclasses import dataclass, field

from dagster_fracmonge.types import CriterionResult, SuiteName, SuiteResult

logger = logging.getLogger(__name__)


@dataclass(kw_only=True)
class BaseSuiteEvent:
    suite: SuiteName


@dataclass(kw_only=True)
class SuiteStarted(BaseSuiteEvent):
    upstream: list[str] = field(default_factory=lambda: [])


@dataclass(kw_only=True)
class SuiteProgress(BaseSuiteEvent):
    message: str
    data: dict[str, t.Any] = field(default_factory=lambda: {})


@dataclass(kw_only=True)
class CriterionEvaluated(BaseSuiteEvent):
    criterion: CriterionResult


@dataclass(kw_only=True)
class ArtifactWritten(BaseSuiteEvent):
    path: str
    kind: str


@dataclass(kw_only=True)
class SuiteFailed(BaseSuiteEvent):
    error: Exception


@dataclass(kw_only=True)
class SuiteCompleted(BaseSuiteEvent):
    result: SuiteResult
    duration_ms: float | None = None


SuiteEvent = (
    SuiteStarted | SuiteProgress | CriterionEvaluated | ArtifactWritten | SuiteFailed | SuiteCompleted
)

SuiteEventHandler = t.Callable[[SuiteEvent], None]


class EventConsole:
    """Publishes suite events to any number of handlers.

    Suites only ever talk to the console, so the same run can be logged to
    python logging, forwarded to a dagster context and recorded for tests
    at once.
    """

    def __init__(self, log_override: logging.Logger | None = None) -> None:
        self._handlers: dict[str, SuiteEventHandler] = {}
        self.logger = log_override or logger
        self.id = str(uuid.uuid4())
        self.logger.debug(f"EventConsole[{self.id}]: created")

    def publish(self, event: SuiteEvent) -> None:
        self.logger.debug(
            f"EventConsole[{self.id}]: sending event {event.__class__.__name__} to {len(self._handlers)} handlers"
        )
        for handler in list(self._handlers.values()):
            handler(event)

    def add_handler(self, handler: SuiteEventHandler) -> str:
        handler_id = str(uuid.uuid4())
        self.logger.debug(f"EventConsole[{self.id}]: Adding handler {handler_id}")
        self._handlers[handler_id] = handler
        return handler_id

    def remove_handler(self, handler_id: str) -> None:
        del self._handlers[handler_id]

    @property
    def handler_count(self) -> int:
        return len(self._handlers)
