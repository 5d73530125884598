import json

import pytest

import labctl
from core.export import load_measure


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("HOME", str(tmp_path))
    return tmp_path


def test_list(workdir, capsys):
    assert labctl.main(["--no-color", "list"]) == labctl.EXIT_PASS
    assert "thm_S_trivial" in capsys.readouterr().out


def test_report_without_records(workdir):
    assert labctl.main(["--no-color", "--out", str(workdir / "runs"), "report"]) == labctl.EXIT_NO_RECORDS


def test_unknown_scenario_is_a_configuration_error(workdir, capsys):
    assert labctl.main(["--no-color", "run", "thm_nothing"]) == labctl.EXIT_ERROR
    assert "ERROR [unknown_scenario]" in capsys.readouterr().out


def test_bad_param_syntax(workdir):
    assert labctl.main(["--no-color", "run", "parseval", "--param", "max_gap"]) == labctl.EXIT_ERROR


def test_build_writes_measure_table(workdir):
    spec = json.dumps({"kind": "central_cantor", "dimension_target": 0.5, "level": 4})
    out = workdir / "out"
    assert labctl.main(["--no-color", "--out", str(out), "build", spec, "--name", "c4"]) == labctl.EXIT_PASS
    measure = load_measure(str(out / "measures" / "c4.tbl"))
    assert measure.atom_count == 16
    assert measure.metadata["nominal_dimension"] == 0.5


def test_run_then_report(workdir):
    out = workdir / "runs"
    args = ["--no-color", "--out", str(out), "--threads", "2", "run", "lemma_concentration",
            "-p", "samples=20", "-p", "rotations=2000", "-p", "agreement=0.8"]
    assert labctl.main(args) == labctl.EXIT_PASS
    assert labctl.main(["--no-color", "--out", str(out), "report"]) == labctl.EXIT_PASS
    assert (out / "summary.txt").exists()
