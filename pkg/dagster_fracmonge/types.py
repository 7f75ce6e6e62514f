import typing as t
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

SuiteName = t.Literal[
    "constants",
    "geometry",
    "assemble",
    "eig",
    "fractional",
    "extension",
    "verification",
]
CriterionStatus = t.Literal["PASS", "FAIL", "SKIPPED"]


class FracMongeError(Exception):
    """Base class for every numerical failure raised by this package"""


class TensorFunction(t.Protocol):
    """A scalar function of (x, z) together with its full gradient.

    Points are arrays of shape (..., n + 1) whose last coordinate is the
    extension variable z.
    """

    def __call__(self, points: FloatArray) -> FloatArray: ...

    def gradient(self, points: FloatArray) -> FloatArray: ...


@dataclass(kw_only=True)
class SampleFunction:
    """Wraps a pair of callables so they satisfy `TensorFunction`."""

    value: t.Callable[[FloatArray], FloatArray]
    grad: t.Callable[[FloatArray], FloatArray]
    label: str = "sample"

    def __call__(self, points: FloatArray) -> FloatArray:
        return self.value(points)

    def gradient(self, points: FloatArray) -> FloatArray:
        return self.grad(points)


@dataclass(kw_only=True)
class CriterionResult:
    """Outcome of one acceptance criterion.

    Criteria that are `asserted=False` are reported in the summary but never
    change the exit status of a run.
    """

    criterion_id: str
    suite: SuiteName
    status: CriterionStatus
    asserted: bool = True
    measured: float = float("nan")
    threshold: float = float("nan")
    description: str = ""

    @property
    def failed(self) -> bool:
        return self.asserted and self.status == "FAIL"

    @classmethod
    def skipped(
        cls, criterion_id: str, suite: SuiteName, *, asserted: bool = True, description: str = ""
    ) -> "CriterionResult":
        return cls(
            criterion_id=criterion_id,
            suite=suite,
            status="SKIPPED",
            asserted=asserted,
            description=description,
        )


@dataclass(kw_only=True)
class SuiteResult:
    """Everything a suite produced: the rows of its report table, its
    criteria, the artifacts written and the in-memory payload handed to
    downstream suites. The payload includes what the upstream suites
    handed to this one."""

    name: SuiteName
    rows: list[dict[str, t.Any]] = field(default_factory=lambda: [])
    criteria: list[CriterionResult] = field(default_factory=lambda: [])
    artifacts: list[str] = field(default_factory=lambda: [])
    payload: dict[str, t.Any] = field(default_factory=lambda: {})

    def criterion(self, criterion_id: str) -> CriterionResult:
        for criterion in self.criteria:
            if criterion.criterion_id == criterion_id:
                return criterion
        raise KeyError(criterion_id)
