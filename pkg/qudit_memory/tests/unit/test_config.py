import json
import logging
from pathlib import Path

import pytest
from pydantic import ValidationError

from qudit_memory.core.config import Settings, resolve_jobs, settings
from qudit_memory.core.errors import ConfigError
from qudit_memory.core.logging import LOGGER_NAME, JSONFormatter, setup_logging
from qudit_memory.models.experiment import ExperimentConfig, SweepSpec, SweepVariable, load_experiment_config

DEFAULTS_FILE = Path(__file__).resolve().parents[3] / "config" / "experiment_defaults.json"


def test_committed_defaults_match_built_in_defaults():
    assert load_experiment_config(DEFAULTS_FILE) == ExperimentConfig()


def test_no_path_gives_defaults():
    config = load_experiment_config(None)
    assert config.shots == 4096
    assert config.spin.A_hf == -220.0
    assert config.tau_us == pytest.approx(100.0)


def test_malformed_json_reports_location(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"shots": 10,\n "seed": }')
    with pytest.raises(ConfigError) as exc:
        load_experiment_config(path)
    assert exc.value.metadata["location"].startswith("line 2")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_experiment_config(tmp_path / "absent.json")


@pytest.mark.parametrize(
    "raw, location",
    [
        ({"shots": 0}, "shots"),
        ({"spin": {"B_z_T": -1.0}}, "spin.B_z_T"),
        ({"unknown_key": 1}, "unknown_key"),
        ({"theta_sweep": {"variable": "theta", "start": -4.0, "stop": 1.0, "points": 5}}, "theta_sweep"),
        ({"storage_sweep": {"variable": "theta", "start": 0.0, "stop": 1.0, "points": 5}}, "storage_sweep"),
        ({"fidelity": {"dd_pulse_counts": [3]}}, "fidelity.dd_pulse_counts"),
    ],
)
def test_schema_violations(tmp_path, raw, location):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(ConfigError) as exc:
        load_experiment_config(path)
    assert exc.value.metadata["location"] == location


def test_sweep_spec_values():
    spec = SweepSpec(variable=SweepVariable.STORAGE_TIME, start=0.0, stop=1.0, points=5)
    assert spec.values().tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    with pytest.raises(ValidationError):
        SweepSpec(variable=SweepVariable.THETA, start=0.5, stop=0.5, points=3)


def test_canonical_json_is_order_independent():
    a = ExperimentConfig(shots=10, seed=3)
    b = ExperimentConfig.model_validate(json.loads(a.canonical_json()))
    assert a.canonical_json() == b.canonical_json()


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("QUDIT_LOG_LEVEL", "debug")
    monkeypatch.setenv("QUDIT_DEFAULT_JOBS", "3")
    settings = Settings()
    assert settings.LOG_LEVEL == "DEBUG"
    assert settings.DEFAULT_JOBS == 3


@pytest.mark.parametrize("name, value", [("QUDIT_LOG_LEVEL", "LOUD"), ("QUDIT_DEFAULT_JOBS", "-1"),
                                         ("QUDIT_FIT_XTOL", "0"), ("QUDIT_DEFAULT_SHOTS", "0")])
def test_settings_validation(monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(ValidationError):
        Settings()


def test_default_shots_setting_sets_config_default(monkeypatch):
    monkeypatch.setattr(settings, "DEFAULT_SHOTS", 128)
    assert ExperimentConfig().shots == 128
    assert ExperimentConfig(shots=9).shots == 9


def test_resolve_jobs():
    assert resolve_jobs(3) == 3
    assert resolve_jobs(0) >= 1


def test_setup_logging_is_idempotent():
    logger = setup_logging("warning", json_format=False)
    again = setup_logging("debug", json_format=True)
    assert logger is again
    assert logger.name == LOGGER_NAME
    assert logger.level == logging.DEBUG
    assert len([h for h in logger.handlers if getattr(h, "_qudit_memory", False)]) == 1


def test_json_formatter_carries_run_id():
    record = logging.LogRecord(LOGGER_NAME, logging.INFO, __file__, 1, "wrote %s", ("x.csv",), None)
    record.run_id = "abc123"
    payload = json.loads(JSONFormatter().format(record))
    assert payload["message"] == "wrote x.csv"
    assert payload["run_id"] == "abc123"
    assert payload["level"] == "INFO"
