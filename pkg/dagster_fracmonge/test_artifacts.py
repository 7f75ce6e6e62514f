from pathlib import Path

import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from dagster_fracmonge.artifacts import (
    ArtifactWriter,
    read_nodal_csv,
    summary_rows,
    write_heatmap,
    write_line_plot,
    write_mesh,
    write_summary,
    write_table,
)
from dagster_fracmonge.console import EventConsole
from dagster_fracmonge.events import EventRecorder
from dagster_fracmonge.potentials import QuadPotential
from dagster_fracmonge.sections import build_section
from dagster_fracmonge.types import CriterionResult


def test_write_table_fills_missing_cells(tmp_path: Path):
    path = write_table(
        tmp_path / "nested" / "rows.csv",
        [{"check": "a", "value": 0.1}, {"check": "b,c", "note": "x", "passed": True}],
    )
    assert path.read_text().splitlines() == [
        "check,value,note,passed",
        "a,0.10000000000000001,,",
        "b;c,,x,true",
    ]


def test_write_table_with_fixed_columns(tmp_path: Path):
    path = write_table(tmp_path / "rows.csv", [{"b": 2, "a": 1, "c": 3}], columns=["a", "b"])
    assert path.read_text().splitlines() == ["a,b", "1,2"]


def test_read_nodal_csv_orders_by_node(tmp_path: Path):
    path = tmp_path / "field.csv"
    path.write_text("node,value\n2,0.5\n0,1.5\n1,-2\n")
    np.testing.assert_array_equal(read_nodal_csv(path), [1.5, -2.0, 0.5])


@pytest.mark.parametrize(
    "content",
    ["node,value\n0,1\n0,2\n", "node,value\n0,1\n5,2\n", "index,value\n0,1\n"],
)
def test_read_nodal_csv_rejects_bad_files(tmp_path: Path, content: str):
    path = tmp_path / "field.csv"
    path.write_text(content)
    with pytest.raises((ValueError, KeyError)):
        read_nodal_csv(path)


def test_mesh_file_of_an_interval(tmp_path: Path):
    sec = build_section(QuadPotential(dim=1, c=1.0), [0.0], 1.0, 10)
    lines = write_mesh(tmp_path / "interval.mesh", sec).read_text().splitlines()
    assert lines[0] == "nodes 12 1"
    assert lines[1].endswith(" 1")
    assert float(lines[1].split()[0]) == pytest.approx(-1.0)
    assert lines[2].endswith(" 0")
    assert lines[13] == "elements 0"
    assert len(lines) == 14


def test_mesh_file_of_a_disk(tmp_path: Path):
    sec = build_section(QuadPotential(dim=2, c=1.0), [0.0, 0.0], 1.0, 8, rings=2)
    lines = write_mesh(tmp_path / "disk.mesh", sec).read_text().splitlines()
    assert lines[0] == "nodes 17 2"
    assert lines[18] == f"elements {sec.elements.shape[0]}"
    assert lines[19] == "0 1 2"


def test_plots_are_byte_for_byte_reproducible(tmp_path: Path):
    x = np.linspace(0.0, 1.0, 30)
    first = write_line_plot(tmp_path / "a.svg", x, {"sin": np.sin(x)}, title="t", markers=[0.5])
    second = write_line_plot(tmp_path / "b.svg", x, {"sin": np.sin(x)}, title="t", markers=[0.5])
    assert first.read_bytes() == second.read_bytes()
    z = np.linspace(0.0, 2.0, 5)
    heat = write_heatmap(tmp_path / "h.svg", x, z, np.outer(z, x), title="heat")
    assert heat.read_text().lstrip().startswith("<?xml")


def test_summary_is_sorted_numerically(tmp_path: Path):
    criteria = [
        CriterionResult(criterion_id="A10", suite="fractional", status="PASS", measured=0.0, threshold=1e-10),
        CriterionResult(criterion_id="A2", suite="fractional", status="FAIL", measured=0.5, threshold=1e-3),
        CriterionResult.skipped("A1", "fractional", asserted=False, description="reported"),
    ]
    assert [row["criterion"] for row in summary_rows(criteria)] == ["A1", "A2", "A10"]
    lines = write_summary(tmp_path, criteria).read_text().splitlines()
    assert lines[0] == "criterion,suite,status,asserted,measured,threshold,description"
    assert lines[1] == "A1,fractional,SKIPPED,false,nan,nan,reported"
    assert lines[2].startswith("A2,fractional,FAIL,true,0.5,")


def test_artifact_writer_announces_files(tmp_path: Path):
    console = EventConsole()
    recorder = EventRecorder()
    console.add_handler(recorder)
    writer = ArtifactWriter(tmp_path, "assemble", console)
    table = writer.table("assemble", [{"check": "symmetry", "value": 0.0}])
    matrix = writer.matrix("K", sp.identity(3, format="csr"), comment="stiffness")
    assert writer.written == [table, matrix]
    assert recorder.artifacts == [table, matrix]
    np.testing.assert_array_equal(scipy.io.mmread(matrix).toarray(), np.eye(3))

    quiet = ArtifactWriter(tmp_path / "quiet", "geometry")
    sec = build_section(QuadPotential(dim=1, c=1.0), [0.0], 1.0, 8)
    assert Path(quiet.mesh("section", sec)).exists()
