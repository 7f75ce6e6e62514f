import pytest

from dagster_fracmonge.scheduler import SuiteScheduler


@pytest.mark.parametrize(
    ("requested", "expected"),
    [
        (["constants"], ["constants"]),
        (["eig"], ["geometry", "assemble", "eig"]),
        (["verification"], ["geometry", "assemble", "eig", "fractional", "extension", "verification"]),
        (["extension", "constants"], ["constants", "geometry", "assemble", "eig", "extension"]),
        ([], []),
    ],
)
def test_order_pulls_in_upstream_suites(requested, expected):
    assert SuiteScheduler().order(requested) == expected


def test_closure_and_upstream():
    scheduler = SuiteScheduler()
    assert scheduler.upstream("verification") == ("fractional", "extension")
    assert scheduler.closure(["fractional"]) == {"geometry", "assemble", "eig", "fractional"}
    with pytest.raises(KeyError):
        scheduler.upstream("plots")  # type: ignore[arg-type]


def test_custom_dependencies():
    scheduler = SuiteScheduler({"constants": ("geometry",), "geometry": ()})
    assert scheduler.order(["constants"]) == ["geometry", "constants"]
