import argparse
from pathlib import Path

import pytest

from dagster_fracmonge.cli import _seed, build_parser, list_suites, main, resolve_config
from dagster_fracmonge.config import ALL_SUITES


def write_config(tmp_path: Path, body: str) -> Path:
    path = tmp_path / "experiment.toml"
    path.write_text(body)
    return path


def test_list_suites(capsys: pytest.CaptureFixture[str]):
    assert main(["--list-suites"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert [line.split()[0] for line in lines] == list(ALL_SUITES)
    assert lines[0].split()[1] == "-"
    assert "fractional, extension" in list_suites()


def test_seed_accepts_hex_and_rejects_negatives():
    assert _seed("0x2a") == 42
    assert _seed("17") == 17
    with pytest.raises(argparse.ArgumentTypeError):
        _seed("-1")
    with pytest.raises(argparse.ArgumentTypeError):
        _seed(str(2**64))


def test_overrides_replace_the_run_table(tmp_path: Path):
    path = write_config(tmp_path, '[run]\nsuites = ["eig"]\nseed = 3\noutput_dir = "from-file"\n')
    args = build_parser().parse_args(["--config", str(path), "--out", "cli-out", "--suite", "constants, geometry"])
    config = resolve_config(args)
    assert config.run.output_dir == "cli-out"
    assert config.run.suites == ["constants", "geometry"]
    assert config.run.seed == 3
    assert build_parser().parse_args([]).runner == "dagster"


def test_invalid_order_is_a_config_error(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    path = write_config(tmp_path, "[fractional]\ns_values = [1.5]\n")
    assert main(["--config", str(path), "--out", str(tmp_path / "out")]) == 2
    err = capsys.readouterr().err
    assert "(0,1)" in err
    assert not (tmp_path / "out").exists()


def test_unknown_suite_is_a_config_error(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    assert main(["--suite", "plots", "--out", str(tmp_path / "out")]) == 2
    assert "run.suites" in capsys.readouterr().err


def test_missing_config_file(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    assert main(["--config", str(tmp_path / "missing.toml")]) == 2
    assert "cannot read config" in capsys.readouterr().err


def test_empty_suite_list_only_writes_the_summary(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    out = tmp_path / "out"
    assert main(["--suite", "", "--out", str(out)]) == 0
    assert [p.name for p in out.iterdir()] == ["summary.csv"]
    assert "SKIPPED" in capsys.readouterr().out


@pytest.mark.parametrize("runner", ["local", "dagster"])
def test_constants_run(tmp_path: Path, capsys: pytest.CaptureFixture[str], runner: str):
    out = tmp_path / "out"
    assert main(["--runner", runner, "--suite", "constants", "--out", str(out), "--seed", "0x7"]) == 0
    report = capsys.readouterr().out
    assert "A3" in report and "PASS" in report
    assert "A1*" in report
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[1].startswith("A1,fractional,SKIPPED,false,")
    assert summary[3].startswith("A3,constants,PASS,true,")


@pytest.mark.parametrize("runner", ["local", "dagster"])
def test_mismatched_input_csv_is_a_config_error(tmp_path: Path, capsys: pytest.CaptureFixture[str], runner: str):
    csv = tmp_path / "v.csv"
    csv.write_text("node,value\n0,1.0\n1,2.0\n2,3.0\n")
    path = write_config(
        tmp_path,
        f'[section]\nresolution = 200\n\n[fractional]\ns_values = [0.5]\nroutes = ["spectral"]\ninput_csv = "{csv}"\n',
    )
    args = ["--config", str(path), "--runner", runner, "--suite", "fractional", "--out", str(tmp_path / "out")]
    assert main(args) == 2
    assert "3 values" in capsys.readouterr().err
