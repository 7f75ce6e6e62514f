import typing as t
from graphlib import TopologicalSorter

from dagster_fracmonge.config import ALL_SUITES
from dagster_fracmonge.types import SuiteName

SUITE_DEPENDENCIES: dict[SuiteName, tuple[SuiteName, ...]] = {
    "constants": (),
    "geometry": (),
    "assemble": ("geometry",),
    "eig": ("assemble",),
    "fractional": ("eig",),
    "extension": ("eig",),
    "verification": ("fractional", "extension"),
}


class SuiteScheduler:
    """Resolves a requested set of suites to everything that has to run, in
    dependency order."""

    def __init__(self, dependencies: t.Mapping[SuiteName, t.Sequence[SuiteName]] | None = None) -> None:
        self._dependencies = dict(dependencies or SUITE_DEPENDENCIES)

    def upstream(self, suite: SuiteName) -> tuple[SuiteName, ...]:
        if suite not in self._dependencies:
            raise KeyError(f"unknown suite {suite!r}")
        return tuple(self._dependencies[suite])

    def closure(self, requested: t.Iterable[SuiteName]) -> set[SuiteName]:
        selected: set[SuiteName] = set()
        pending = list(requested)
        while pending:
            suite = pending.pop()
            if suite in selected:
                continue
            selected.add(suite)
            pending.extend(self.upstream(suite))
        return selected

    def order(self, requested: t.Iterable[SuiteName]) -> list[SuiteName]:
        """Topological order of the closure. Ties follow the canonical suite
        order so the result is deterministic."""
        selected = self.closure(requested)
        rank = {name: i for i, name in enumerate(ALL_SUITES)}
        sorter = TopologicalSorter({suite: self.upstream(suite) for suite in selected})
        sorter.prepare()
        ordered: list[SuiteName] = []
        while sorter.is_active():
            ready = sorted(sorter.get_ready(), key=lambda name: rank.get(name, len(rank)))
            for suite in ready:
                ordered.append(suite)
                sorter.done(suite)
        return ordered
