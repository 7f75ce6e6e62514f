import logging
import sys
import typing as t
from pathlib import Path

import pytest

from dagster_fracmonge.testing import FracMongeTestContext

logger = logging.getLogger(__name__)


@pytest.fixture(scope="session", autouse=True)
def setup_debug_logging_for_tests() -> None:
    root_logger = logging.getLogger(__name__.split(".")[0])
    root_logger.setLevel(logging.DEBUG)

    logging.basicConfig(stream=sys.stdout, level=logging.DEBUG)


@pytest.fixture(scope="session")
def shared_problems(tmp_path_factory: pytest.TempPathFactory) -> FracMongeTestContext:
    """Sections and full bases are expensive, so they are shared across the session"""
    return FracMongeTestContext(output_dir=tmp_path_factory.mktemp("shared"))


@pytest.fixture
def fracmonge_test_context(tmp_path: Path, shared_problems: FracMongeTestContext) -> t.Iterator[FracMongeTestContext]:
    context = FracMongeTestContext(output_dir=tmp_path / "out")
    context._cache = shared_problems._cache
    yield context
