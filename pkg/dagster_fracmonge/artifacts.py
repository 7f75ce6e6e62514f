"""Report files: CSV tables, SVG plots, meshes and sparse matrices.

Everything written here is deterministic for a given input. Floats are
printed with 17 significant digits and the SVG backend gets a fixed hash
salt and no date, so reruns with the same config and seed produce identical
files.
"""

import logging
import typing as t
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import numpy as np
import pyarrow as pa
import pyarrow.csv as pacsv
import scipy.io
import scipy.sparse as sp
from matplotlib.figure import Figure

from dagster_fracmonge.console import ArtifactWritten, EventConsole
from dagster_fracmonge.sections import Section
from dagster_fracmonge.types import CriterionResult, FloatArray, SuiteName
from dagster_fracmonge.utils import format_value

logger = logging.getLogger(__name__)

SVG_HASH_SALT = "dagster-fracmonge"
SUMMARY_COLUMNS = ("criterion", "suite", "status", "asserted", "measured", "threshold", "description")


def _cell(value: t.Any) -> str:
    return format_value(value).replace(",", ";").replace('"', "'").replace("\n", " ")


def rows_to_table(rows: t.Sequence[t.Mapping[str, t.Any]], columns: t.Sequence[str] | None = None) -> pa.Table:
    """Builds a table of pre-formatted string columns. Columns default to the
    keys of all rows in first-seen order; missing cells are empty."""
    if columns is None:
        seen: dict[str, None] = {}
        for row in rows:
            for key in row:
                seen.setdefault(key, None)
        columns = list(seen)
    data = {name: pa.array([_cell(row.get(name)) for row in rows], type=pa.string()) for name in columns}
    return pa.table(data)


def write_table(path: Path, rows: t.Sequence[t.Mapping[str, t.Any]], columns: t.Sequence[str] | None = None) -> Path:
    table = rows_to_table(rows, columns)
    path.parent.mkdir(parents=True, exist_ok=True)
    pacsv.write_csv(table, str(path), write_options=pacsv.WriteOptions(include_header=True, quoting_style="none"))
    return path


def read_nodal_csv(path: str | Path) -> FloatArray:
    """Reads a (node, value) CSV into a vector ordered by node index.

    Raises:
        ValueError: the columns are missing or node indices are not a
            permutation of 0..N-1
    """
    table = pacsv.read_csv(
        str(path),
        convert_options=pacsv.ConvertOptions(column_types={"node": pa.int64(), "value": pa.float64()}),
    )
    if "node" not in table.column_names or "value" not in table.column_names:
        raise ValueError(f"{path} must have columns node and value")
    nodes = table.column("node").to_numpy()
    values = table.column("value").to_numpy()
    out = np.full(nodes.size, np.nan)
    if nodes.size and (nodes.min() < 0 or nodes.max() >= nodes.size or np.unique(nodes).size != nodes.size):
        raise ValueError(f"{path} node indices must be a permutation of 0..{nodes.size - 1}")
    out[nodes] = values
    return out


def _save_svg(fig: Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def write_line_plot(
    path: Path,
    x: FloatArray,
    series: t.Mapping[str, FloatArray],
    *,
    title: str,
    xlabel: str = "x",
    ylabel: str = "",
    markers: t.Sequence[float] = (),
) -> Path:
    """One panel of curves against x, with vertical lines at `markers`
    (section boundaries)."""
    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.add_subplot()
    order = np.argsort(x)
    for label, values in series.items():
        ax.plot(x[order], np.asarray(values)[order], label=label, linewidth=1.2)
    for position in markers:
        ax.axvline(position, color="0.4", linestyle="--", linewidth=0.8)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(loc="best")
    return _save_svg(fig, path)


def write_heatmap(
    path: Path,
    x: FloatArray,
    z: FloatArray,
    values: FloatArray,
    *,
    title: str,
    xlabel: str = "x",
    ylabel: str = "z",
) -> Path:
    """values has shape (len(z), len(x))."""
    fig = Figure(figsize=(6.0, 4.5))
    ax = fig.add_subplot()
    mesh = ax.pcolormesh(x, z, values, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return _save_svg(fig, path)


def write_mesh(path: Path, sec: Section) -> Path:
    """Plain text mesh: a `nodes` block (coordinates and boundary flag) and
    an `elements` block (vertex indices, empty in one dimension)."""
    lines = [f"nodes {sec.nodes.shape[0]} {sec.dim}"]
    for point, flag in zip(sec.nodes, sec.is_boundary):
        coords = " ".join(format_value(float(c)) for c in np.atleast_1d(point))
        lines.append(f"{coords} {int(flag)}")
    elements = sec.elements if sec.elements is not None else np.zeros((0, 3), dtype=np.int64)
    lines.append(f"elements {elements.shape[0]}")
    lines.extend(" ".join(str(int(v)) for v in element) for element in elements)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_matrix(path: Path, matrix: sp.spmatrix | FloatArray, comment: str = "") -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    data = sp.coo_matrix(matrix) if not sp.issparse(matrix) else matrix.tocoo()
    scipy.io.mmwrite(str(path), data, comment=comment, precision=17)
    return path


def summary_rows(criteria: t.Sequence[CriterionResult]) -> list[dict[str, t.Any]]:
    ordered = sorted(criteria, key=lambda c: int(c.criterion_id.lstrip("A")))
    return [
        {
            "criterion": c.criterion_id,
            "suite": c.suite,
            "status": c.status,
            "asserted": c.asserted,
            "measured": c.measured,
            "threshold": c.threshold,
            "description": c.description,
        }
        for c in ordered
    ]


def write_summary(root: Path, criteria: t.Sequence[CriterionResult]) -> Path:
    return write_table(root / "summary.csv", summary_rows(criteria), SUMMARY_COLUMNS)


class ArtifactWriter:
    """Writes the artifacts of one suite under `root` and announces each file
    on the console."""

    def __init__(self, root: Path, suite: SuiteName, console: EventConsole | None = None) -> None:
        self.root = Path(root)
        self.suite = suite
        self.console = console
        self.written: list[str] = []

    def _announce(self, path: Path, kind: str) -> str:
        name = str(path)
        self.written.append(name)
        if self.console is not None:
            self.console.publish(ArtifactWritten(suite=self.suite, path=name, kind=kind))
        else:
            logger.debug(f"wrote {kind} {name}")
        return name

    def table(self, name: str, rows: t.Sequence[t.Mapping[str, t.Any]], columns: t.Sequence[str] | None = None) -> str:
        return self._announce(write_table(self.root / f"{name}.csv", rows, columns), "csv")

    def line_plot(self, name: str, x: FloatArray, series: t.Mapping[str, FloatArray], **options: t.Any) -> str:
        return self._announce(write_line_plot(self.root / f"{name}.svg", x, series, **options), "svg")

    def heatmap(self, name: str, x: FloatArray, z: FloatArray, values: FloatArray, **options: t.Any) -> str:
        return self._announce(write_heatmap(self.root / f"{name}.svg", x, z, values, **options), "svg")

    def mesh(self, name: str, sec: Section) -> str:
        return self._announce(write_mesh(self.root / f"{name}.mesh", sec), "mesh")

    def matrix(self, name: str, matrix: sp.spmatrix | FloatArray, comment: str = "") -> str:
        return self._announce(write_matrix(self.root / f"{name}.mtx", matrix, comment), "mtx")
