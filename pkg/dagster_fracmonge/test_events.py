import logging

import pytest

from dagster_fracmonge.console import (
    ArtifactWritten,
    CriterionEvaluated,
    EventConsole,
    SuiteCompleted,
    SuiteFailed,
    SuiteProgress,
    SuiteStarted,
)
from dagster_fracmonge.events import EventRecorder
from dagster_fracmonge.types import CriterionResult, SuiteResult


def test_console_fans_out_to_handlers():
    console = EventConsole()
    first: list[object] = []
    second: list[object] = []
    first_id = console.add_handler(first.append)
    console.add_handler(second.append)
    assert console.handler_count == 2

    console.publish(SuiteStarted(suite="eig", upstream=["assemble"]))
    console.remove_handler(first_id)
    console.publish(SuiteProgress(suite="eig", message="solving"))
    assert len(first) == 1
    assert len(second) == 2
    with pytest.raises(KeyError):
        console.remove_handler(first_id)


def test_recorder_collects_and_logs(caplog: pytest.LogCaptureFixture):
    recorder = EventRecorder(log_override=logging.getLogger("recorder"))
    failed = CriterionResult(criterion_id="A2", suite="fractional", status="FAIL", measured=0.5, threshold=1e-3)
    reported = CriterionResult(
        criterion_id="A1", suite="fractional", status="FAIL", asserted=False, measured=0.05, threshold=1e-3
    )
    error = RuntimeError("eigensolver failed")
    with caplog.at_level(logging.DEBUG, logger="recorder"):
        recorder(SuiteStarted(suite="fractional", upstream=["eig"]))
        recorder(CriterionEvaluated(suite="fractional", criterion=failed))
        recorder(CriterionEvaluated(suite="fractional", criterion=reported))
        recorder(ArtifactWritten(suite="fractional", path="out/fractional.csv", kind="csv"))
        recorder(SuiteFailed(suite="extension", error=error))
        recorder(SuiteCompleted(suite="fractional", result=SuiteResult(name="fractional"), duration_ms=12.0))

    assert len(recorder.events) == 6
    assert recorder.criteria == [failed, reported]
    assert recorder.artifacts == ["out/fractional.csv"]
    assert recorder.failures == {"extension": error}

    levels = {record.getMessage(): record.levelno for record in caplog.records}
    assert levels["A2: FAIL measured=5.000e-01 threshold=1.000e-03"] == logging.WARNING
    assert levels["A1 (reported): FAIL measured=5.000e-02 threshold=1.000e-03"] == logging.INFO
    assert levels["suite extension failed: eigensolver failed"] == logging.ERROR
    assert "suite fractional completed in 12 ms" in levels


def test_progress_logging_can_be_disabled(caplog: pytest.LogCaptureFixture):
    recorder = EventRecorder(log_override=logging.getLogger("quiet"), enable_progress_logging=False)
    with caplog.at_level(logging.DEBUG, logger="quiet"):
        recorder(SuiteProgress(suite="eig", message="solving", data={"m": 3}))
    assert recorder.events
    assert not caplog.records
