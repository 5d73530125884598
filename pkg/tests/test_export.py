import json

import numpy as np
import pytest

from core.errors import LabError
from core.export import ExportManager, load_measure
from core.fractals import build_cantor
from core.rotations import haar_measure


def test_measure_table_round_trip(tmp_path):
    mu = build_cantor(0.5, 5).measure
    path = str(tmp_path / "measures" / "cantor.tbl")
    success, _ = ExportManager({"config_hash": "abc"}).export_measure(mu, path)
    assert success
    loaded = load_measure(path)
    np.testing.assert_array_equal(loaded.points, mu.points)
    np.testing.assert_array_equal(loaded.weights, mu.weights)
    assert loaded.resolution == mu.resolution
    assert loaded.metadata["provenance"]["kind"] == "central_cantor"
    assert loaded.metadata["config_hash"] == "abc"


def test_load_measure_rejects_other_files(tmp_path):
    path = tmp_path / "notes.tbl"
    path.write_text("hello\n")
    with pytest.raises(LabError) as e:
        load_measure(str(path))
    assert e.value.code == "bad_file"
    with pytest.raises(LabError) as e:
        load_measure(str(tmp_path / "missing.tbl"))
    assert e.value.code == "bad_file"


def test_table_sidecar_merges_stamp_and_metadata(tmp_path):
    path = tmp_path / "rotations.csv"
    success, message = ExportManager({"scenario": "demo"}).export_rotations(haar_measure(2, 3), str(path))
    assert success, message
    lines = path.read_text().splitlines()
    assert lines[0] == "g00,g01,g10,g11,weight"
    assert len(lines) == 4
    sidecar = json.loads((tmp_path / "rotations.csv.json").read_text())
    assert sidecar["scenario"] == "demo"
    assert sidecar["beta"] == 1.0


def test_export_failure_is_reported(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    success, message = ExportManager().export_table(str(blocker / "table.csv"), ["a"], [[1.0]])
    assert not success
    assert message.startswith("Error exporting table")


def test_text_summary_without_rows(tmp_path):
    path = tmp_path / "summary.txt"
    success, _ = ExportManager().export_text_summary({"rows": []}, str(path))
    assert success
    assert "No records." in path.read_text()
