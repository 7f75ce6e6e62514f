import typing as t

import pytest

from dagster_fracmonge import console
from dagster_fracmonge.artifacts import SUMMARY_COLUMNS
from dagster_fracmonge.controller import (
    EXIT_CRITERION_FAILED,
    EXIT_NUMERICAL_FAILURE,
    EXIT_OK,
    ExperimentRun,
    SuiteFailedError,
)
from dagster_fracmonge.config import ALL_SUITES, ExperimentConfig
from dagster_fracmonge.suites import CRITERIA, SuiteRunner
from dagster_fracmonge.testing import FracMongeTestContext
from dagster_fracmonge.types import CriterionResult, FracMongeError, SuiteResult


def broken_assemble(self: SuiteRunner, ctx: t.Any, payload: dict[str, t.Any]) -> dict[str, t.Any]:
    raise FloatingPointError("stiffness matrix is singular")


def statuses(run: ExperimentRun) -> dict[str, str]:
    return {c.criterion_id: c.status for c in run.criteria()}


def resolved_config(context: FracMongeTestContext) -> ExperimentConfig:
    """Fine enough that the coarse verification problem still resolves the inner sections"""
    return context.config(section={"resolution": 1000})


@pytest.mark.parametrize("runner", ["local", "dagster"])
def test_constants_suite_passes(fracmonge_test_context: FracMongeTestContext, runner: str):
    run, recorder = fracmonge_test_context.run(["constants"], runner=runner)
    assert run.order == ["constants"]
    assert not run.failures
    assert run.exit_status == EXIT_OK

    found = statuses(run)
    assert found["A3"] == "PASS"
    assert found["A8"] == "PASS"
    assert all(status == "SKIPPED" for cid, status in found.items() if cid not in ("A3", "A8"))
    assert [c.criterion_id for c in run.criteria()] == list(CRITERIA)

    assert run.results["constants"].rows
    assert any(isinstance(e, console.SuiteCompleted) for e in recorder.events)
    assert {c.criterion_id for c in recorder.criteria} == {"A3", "A8"}


def test_summary_is_written(fracmonge_test_context: FracMongeTestContext):
    run, recorder = fracmonge_test_context.run(["constants"])
    assert run.summary_path == fracmonge_test_context.output_dir / "summary.csv"
    lines = run.summary_path.read_text().splitlines()
    assert lines[0] == ",".join(SUMMARY_COLUMNS)
    assert len(lines) == 1 + len(CRITERIA)
    assert (fracmonge_test_context.output_dir / "constants.csv").exists()
    assert str(fracmonge_test_context.output_dir / "constants.csv") in recorder.artifacts


def test_skipped_criteria_name_the_reason(fracmonge_test_context: FracMongeTestContext):
    run, _ = fracmonge_test_context.run(["constants"])
    skipped = {c.criterion_id: c for c in run.criteria() if c.status == "SKIPPED"}
    assert skipped["A7"].description == "suite geometry not run"
    assert skipped["A7"].threshold == CRITERIA["A7"].threshold
    assert not skipped["A1"].asserted


def test_empty_selection_only_writes_the_summary(fracmonge_test_context: FracMongeTestContext):
    run, recorder = fracmonge_test_context.run([])
    assert run.order == []
    assert run.exit_status == EXIT_OK
    assert recorder.events == []
    assert sorted(p.name for p in fracmonge_test_context.output_dir.iterdir()) == ["summary.csv"]
    assert all(c.status == "SKIPPED" for c in run.criteria())


def test_requested_suites_pull_in_their_upstream(fracmonge_test_context: FracMongeTestContext):
    run, _ = fracmonge_test_context.run(["eig"])
    assert run.order == ["geometry", "assemble", "eig"]
    assert not run.failures
    basis = run.results["eig"].payload["basis"]
    assert basis.m == run.results["assemble"].payload["operators"].n
    assert statuses(run)["A7"] != "SKIPPED"


@pytest.mark.parametrize("runner", ["local", "dagster"])
def test_failed_suite_blocks_downstream(
    fracmonge_test_context: FracMongeTestContext, monkeypatch: pytest.MonkeyPatch, runner: str
):
    monkeypatch.setattr(SuiteRunner, "assemble", broken_assemble)
    run, _ = fracmonge_test_context.run(["constants", "eig"], runner=runner)

    assert set(run.failures) == {"assemble", "eig"}
    assert "singular" in str(run.failures["assemble"])
    assert "geometry" in run.results and "constants" in run.results
    assert run.exit_status == EXIT_NUMERICAL_FAILURE
    assert statuses(run)["A3"] == "PASS"
    assert run.summary_path is not None and run.summary_path.exists()

    with pytest.raises(SuiteFailedError) as excinfo:
        run.raise_for_failures()
    assert "assemble" in str(excinfo.value)


def test_local_failure_is_published(fracmonge_test_context: FracMongeTestContext, monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setattr(SuiteRunner, "assemble", broken_assemble)
    run, recorder = fracmonge_test_context.run(["assemble"])
    assert isinstance(recorder.failures["assemble"], FloatingPointError)
    assert run.failures["assemble"].errors == [recorder.failures["assemble"]]


def test_exit_status_ignores_reported_only_failures():
    run = ExperimentRun(requested=["fractional"], order=["fractional"])
    run.results["fractional"] = SuiteResult(
        name="fractional",
        criteria=[
            CriterionResult(criterion_id="A1", suite="fractional", status="FAIL", asserted=False),
            CriterionResult(criterion_id="A2", suite="fractional", status="PASS"),
            CriterionResult(criterion_id="A10", suite="fractional", status="PASS"),
        ],
    )
    assert run.exit_status == EXIT_OK
    run.results["fractional"].criteria[1].status = "FAIL"
    assert run.exit_status == EXIT_CRITERION_FAILED
    assert [c.criterion_id for c in run.failed_criteria] == ["A2"]
    run.failures["verification"] = SuiteFailedError("verification", "boom", [])
    assert run.exit_status == EXIT_NUMERICAL_FAILURE


def test_every_suite_runs_end_to_end_on_both_runners(fracmonge_test_context: FracMongeTestContext):
    config = resolved_config(fracmonge_test_context)
    found = {}
    for runner in ("local", "dagster"):
        run, _ = fracmonge_test_context.run(list(ALL_SUITES), runner=runner, config=config)
        assert sorted(run.order) == sorted(ALL_SUITES)
        assert not run.failures, {suite: str(error) for suite, error in run.failures.items()}
        found[runner] = statuses(run)

        criteria = {c.criterion_id: c for c in run.criteria()}
        assert not criteria["A1"].asserted
        assert criteria["A1"].status == "FAIL"
        for criterion_id in ("A2", "A3", "A5", "A6", "A8", "A10"):
            assert criteria[criterion_id].status == "PASS", criteria[criterion_id]
        assert all(c.status != "SKIPPED" for c in criteria.values())
        assert run.exit_status in (EXIT_OK, EXIT_CRITERION_FAILED)
        assert "poincare" in {row["check"] for row in run.results["verification"].rows}
    assert found["local"] == found["dagster"]


def test_suites_see_the_payloads_of_every_upstream_suite(fracmonge_test_context: FracMongeTestContext):
    config = fracmonge_test_context.config(fractional={"routes": ["spectral"]})
    run, _ = fracmonge_test_context.run(["fractional"], config=config)
    assert run.order == ["geometry", "assemble", "eig", "fractional"]
    assert not run.failures
    payload = run.results["fractional"].payload
    assert {"potential", "section", "operators", "basis", "solutions"} <= set(payload)
    assert statuses(run)["A2"] == "SKIPPED"
    assert statuses(run)["A10"] == "PASS"


def test_poincare_stability_uses_several_random_samples(fracmonge_test_context: FracMongeTestContext):
    run, _ = fracmonge_test_context.run(["verification"], config=resolved_config(fracmonge_test_context))
    rows = [row for row in run.results["verification"].rows if row["check"] == "poincare"]
    assert [row["sample"] for row in rows] == [0, 1, 2]
    assert len({row["value"] for row in rows}) == 3


@pytest.mark.parametrize("runner", ["local", "dagster"])
def test_programming_errors_propagate(
    fracmonge_test_context: FracMongeTestContext, monkeypatch: pytest.MonkeyPatch, runner: str
):
    def mistyped_assemble(self: SuiteRunner, ctx: t.Any, payload: dict[str, t.Any]) -> dict[str, t.Any]:
        raise TypeError("unsupported operand")

    monkeypatch.setattr(SuiteRunner, "assemble", mistyped_assemble)
    with pytest.raises((TypeError, RuntimeError), match="unsupported operand"):
        fracmonge_test_context.run(["assemble"], runner=runner)


def test_suite_failures_are_package_errors():
    error = SuiteFailedError("eig", "no convergence", [])
    assert isinstance(error, FracMongeError)
    assert error.suite == "eig"
