# ruff: noqa: F403 F401
from .base import (
    EXIT_CONFIG_ERROR,
    EXIT_CRITERION_FAILED,
    EXIT_NUMERICAL_FAILURE,
    EXIT_OK,
    ExperimentController,
    ExperimentRun,
    SuiteFailedError,
)
from .dagster import DagsterExperimentController
