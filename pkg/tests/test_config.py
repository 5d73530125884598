import json
import logging

import pytest

from utils.config import DEFAULT_CONFIG, get_default_config, load_config, save_config
from utils.logging_config import setup_logging


@pytest.fixture
def isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("HOME", str(tmp_path))
    return tmp_path


def test_defaults_without_a_file(isolated):
    assert load_config() == DEFAULT_CONFIG


def test_user_file_is_merged_over_defaults(isolated):
    (isolated / "config.json").write_text(json.dumps({"runner": {"threads": 8}}))
    config = load_config()
    assert config["runner"]["threads"] == 8
    assert config["runner"]["slope_tolerance"] == DEFAULT_CONFIG["runner"]["slope_tolerance"]
    assert config["limits"] == DEFAULT_CONFIG["limits"]


def test_malformed_file_falls_back_to_defaults(isolated):
    path = isolated / "broken.json"
    path.write_text("{not json")
    assert load_config(str(path)) == DEFAULT_CONFIG


def test_save_and_reload(isolated):
    config = get_default_config()
    config["estimators"]["box_offsets"] = 5
    path = isolated / "nested" / "settings.json"
    assert save_config(config, str(path))
    assert load_config(str(path))["estimators"]["box_offsets"] == 5


def test_default_config_is_a_copy():
    config = get_default_config()
    config["limits"]["atom_cap"] = 1
    assert DEFAULT_CONFIG["limits"]["atom_cap"] == 10**7


def test_setup_logging_writes_the_requested_file(tmp_path):
    path = tmp_path / "logs" / "lab.log"
    try:
        assert setup_logging(logging.DEBUG, log_to_file=False, log_file=str(path)) == str(path)
        logging.getLogger("tests").debug("written to file")
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert "DEBUG - written to file" in path.read_text()
    finally:
        assert setup_logging(logging.WARNING, log_to_file=False) is None
