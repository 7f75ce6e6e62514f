import typing as t
from pathlib import Path

import dagster as dg
import pytest

from dagster_fracmonge import console
from dagster_fracmonge.resource import DagsterSuiteEventHandler, ExperimentResource, SuiteFailedError
from dagster_fracmonge.suites import SuiteRunner
from dagster_fracmonge.testing import FracMongeTestContext
from dagster_fracmonge.translator import SuiteTranslator
from dagster_fracmonge.types import CriterionResult, SuiteResult


@pytest.fixture
def dagster_context() -> dg.AssetExecutionContext:
    return dg.build_asset_context(instance=dg.DagsterInstance.ephemeral())


def criterion(criterion_id: str, suite: t.Any, status: t.Any, asserted: bool = True) -> CriterionResult:
    return CriterionResult(
        criterion_id=criterion_id, suite=suite, status=status, asserted=asserted, measured=0.5, threshold=1e-3
    )


def test_resource_config_round_trip(fracmonge_test_context: FracMongeTestContext, tmp_path: Path):
    config = fracmonge_test_context.config(fractional={"s_values": [0.3, 0.6]})
    resource = ExperimentResource.from_config(config, tmp_path)
    assert resource.output_dir == str(tmp_path)
    assert resource.experiment_config() == config
    assert ExperimentResource.from_config(config).output_dir is None


def test_event_handler_reports_check_results(dagster_context: dg.AssetExecutionContext):
    handler = DagsterSuiteEventHandler(context=dagster_context, suite="fractional", translator=SuiteTranslator())
    handler.process_events(console.SuiteStarted(suite="fractional", upstream=["eig"]))
    handler.process_events(console.SuiteProgress(suite="fractional", message="working", data={"s": 0.5}))
    handler.process_events(
        console.CriterionEvaluated(suite="fractional", criterion=criterion("A1", "fractional", "FAIL", asserted=False))
    )
    handler.process_events(
        console.CriterionEvaluated(suite="fractional", criterion=criterion("A2", "fractional", "FAIL"))
    )
    handler.process_events(console.ArtifactWritten(suite="fractional", path="fractional.csv", kind="csv"))

    results = {r.check_name: r for r in handler.check_results()}
    assert list(results) == ["criterion_a1", "criterion_a2", "criterion_a10"]
    assert all(r.asset_key == dg.AssetKey(["fracmonge", "fractional"]) for r in results.values())

    a1, a2, a10 = results["criterion_a1"], results["criterion_a2"], results["criterion_a10"]
    assert not a1.passed and a1.severity == dg.AssetCheckSeverity.WARN
    assert not a2.passed and a2.severity == dg.AssetCheckSeverity.ERROR
    assert a10.passed and a10.severity == dg.AssetCheckSeverity.ERROR
    assert a10.metadata["status"].value == "SKIPPED"
    assert a2.metadata["measured"].value == 0.5
    assert [c.criterion_id for c in handler.criteria] == ["A1", "A2"]


def test_event_handler_collects_errors(dagster_context: dg.AssetExecutionContext):
    handler = DagsterSuiteEventHandler(context=dagster_context, suite="eig", translator=SuiteTranslator())
    error = RuntimeError("no convergence")
    handler.process_events(console.SuiteFailed(suite="eig", error=error))
    assert handler.errors == [error]
    assert list(handler.check_results()) == []


def test_log_context_tags_the_event(dagster_context: dg.AssetExecutionContext):
    handler = DagsterSuiteEventHandler(context=dagster_context, suite="geometry", translator=SuiteTranslator())
    log_context = handler.log_context(console.SuiteProgress(suite="geometry", message="section built"))
    assert log_context.ensure_standard_obj({"nodes": 3}) == {
        "nodes": 3,
        "_event_type": "SuiteProgress",
        "_suite": "geometry",
    }


def test_resource_run_yields_output_then_checks(
    fracmonge_test_context: FracMongeTestContext, dagster_context: dg.AssetExecutionContext
):
    resource = ExperimentResource.from_config(fracmonge_test_context.config(), fracmonge_test_context.output_dir)
    events = list(resource.run(dagster_context, suite="constants", upstream={}, translator=SuiteTranslator()))

    output = events[0]
    assert isinstance(output, dg.Output)
    assert isinstance(output.value, SuiteResult)
    assert output.metadata["criteria"].value == "A3=PASS, A8=PASS"

    checks = events[1:]
    assert [c.check_name for c in checks] == ["criterion_a3", "criterion_a8"]
    assert all(c.passed for c in checks)


def test_resource_run_raises_on_suite_failure(
    fracmonge_test_context: FracMongeTestContext,
    dagster_context: dg.AssetExecutionContext,
    monkeypatch: pytest.MonkeyPatch,
):
    def broken_constants(self: SuiteRunner, ctx: t.Any) -> dict[str, t.Any]:
        raise ArithmeticError("gamma overflow")

    monkeypatch.setattr(SuiteRunner, "constants", broken_constants)
    resource = ExperimentResource.from_config(fracmonge_test_context.config(), fracmonge_test_context.output_dir)

    with pytest.raises(SuiteFailedError) as excinfo:
        list(resource.run(dagster_context, suite="constants", upstream={}, translator=SuiteTranslator()))
    assert excinfo.value.suite == "constants"
    assert "gamma overflow" in str(excinfo.value)
    assert len(excinfo.value.errors) == 1
    assert isinstance(excinfo.value.errors[0], ArithmeticError)


def test_resource_run_lets_programming_errors_through(
    fracmonge_test_context: FracMongeTestContext,
    dagster_context: dg.AssetExecutionContext,
    monkeypatch: pytest.MonkeyPatch,
):
    def broken_constants(self: SuiteRunner, ctx: t.Any) -> dict[str, t.Any]:
        raise TypeError("unsupported operand")

    monkeypatch.setattr(SuiteRunner, "constants", broken_constants)
    resource = ExperimentResource.from_config(fracmonge_test_context.config(), fracmonge_test_context.output_dir)

    with pytest.raises(TypeError):
        list(resource.run(dagster_context, suite="constants", upstream={}, translator=SuiteTranslator()))
