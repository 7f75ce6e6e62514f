import math
import typing as t
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np

T = t.TypeVar("T")
R = t.TypeVar("R")


def parallel_map(
    func: Callable[[T], R], items: Iterable[T], max_workers: int | None = None
) -> list[R]:
    """Map `func` over `items` on a thread pool.

    Results are returned in input order regardless of completion order, so
    reductions over the result list stay deterministic.

    Args:
        func: A pure function of one item
        items: The inputs
        max_workers: Passed through to the executor

    Returns:
        list: func(item) for each item, in order
    """
    items = list(items)
    if len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        return list(executor.map(func, items))


def format_float(value: float) -> str:
    """Formats a float with 17 significant digits, the round-trip precision
    of a double."""
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.17g}"


def format_value(value: t.Any) -> str:
    match value:
        case bool() | np.bool_():
            return "true" if value else "false"
        case int() | np.integer():
            return str(int(value))
        case float() | np.floating():
            return format_float(float(value))
        case None:
            return ""
        case _:
            return str(value)


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least squares slope of log(y) against log(x)."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def relative_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    if scale == 0.0:
        return 0.0
    return abs(a - b) / scale
