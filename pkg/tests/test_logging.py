import json
import logging

import numpy as np
import pytest

from src.logging_config import (
    StructuredFormatter,
    clear_run_id,
    get_run_id,
    log_solver_event,
    set_run_id,
    setup_logging,
)

ENV_OVERRIDES = (
    "LOG_LEVEL",
    "LOG_FORMAT",
    "LOG_FILE",
    "ENABLE_FILE_LOGGING",
    "ENABLE_CONSOLE_LOGGING",
)


def make_record(message="Newton converged", **extra):
    record = logging.LogRecord("src.test", logging.INFO, __file__, 1, message, None, None)
    for key, value in extra.items():
        setattr(record, key, value)
    return record


@pytest.fixture
def run_id():
    set_run_id("branch-1a2b3c4d")
    yield "branch-1a2b3c4d"
    clear_run_id()


class TestStructuredFormatter:
    """Test text and JSON log formatting."""

    def test_json_fields(self, run_id):
        """Test that JSON records carry service, run id and extra context."""
        line = StructuredFormatter(json_format=True).format(make_record(kappa=0.21, iterations=3))
        data = json.loads(line)
        assert data["message"] == "Newton converged"
        assert data["service"] == "ekman-bifurcation"
        assert data["run_id"] == run_id
        assert data["kappa"] == 0.21
        assert data["iterations"] == 3

    def test_json_numpy_values(self):
        """Test that non-JSON values fall back to strings."""
        line = StructuredFormatter(json_format=True).format(make_record(shape=np.zeros(2)))
        assert "shape" in json.loads(line)

    def test_text_context(self, run_id):
        """Test key=value context in text mode."""
        line = StructuredFormatter().format(make_record(kappa=0.21))
        assert f"[{run_id}]" in line
        assert "Newton converged" in line
        assert "kappa=0.21" in line

    def test_no_run_id(self):
        """Test that records without a run id omit it."""
        clear_run_id()
        assert get_run_id() is None
        assert "run_id" not in json.loads(StructuredFormatter(json_format=True).format(make_record()))


class TestSetupLogging:
    """Test logging configuration and environment overrides."""

    @pytest.fixture(autouse=True)
    def clean_env(self, monkeypatch):
        for name in ENV_OVERRIDES:
            monkeypatch.delenv(name, raising=False)
        yield
        logging.getLogger().handlers.clear()

    def test_level_from_config(self):
        """Test that the configured level is applied to the root logger."""
        setup_logging({"level": "WARNING"})
        assert logging.getLogger().level == logging.WARNING

    def test_env_override(self, monkeypatch):
        """Test that LOG_LEVEL beats the config file."""
        monkeypatch.setenv("LOG_LEVEL", "DEBUG")
        setup_logging({"level": "ERROR"})
        assert logging.getLogger().level == logging.DEBUG

    def test_invalid_level_falls_back(self, monkeypatch, capsys):
        """Test that an unknown level falls back to INFO with a warning."""
        setup_logging({"level": "LOUD"})
        assert logging.getLogger().level == logging.INFO
        assert "Invalid log level" in capsys.readouterr().err

    def test_file_handler(self, tmp_path, monkeypatch):
        """Test that file logging writes JSON lines."""
        path = tmp_path / "logs" / "ekman.log"
        setup_logging({"level": "INFO", "file": {"enabled": True, "path": str(path)}})
        logging.getLogger("src.test").info("written", extra={"step": 1})
        for handler in logging.getLogger().handlers:
            handler.flush()
        lines = path.read_text().strip().splitlines()
        assert json.loads(lines[-1])["step"] == 1

    def test_console_disabled(self, monkeypatch):
        """Test ENABLE_CONSOLE_LOGGING=false removes the stderr handler."""
        monkeypatch.setenv("ENABLE_CONSOLE_LOGGING", "false")
        setup_logging({})
        assert logging.getLogger().handlers == []

    def test_file_failure_adds_no_handler(self, tmp_path, monkeypatch):
        """Test that a failed file handler with console off leaves root without handlers."""
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        monkeypatch.setenv("ENABLE_CONSOLE_LOGGING", "false")
        setup_logging(
            {"level": "DEBUG", "file": {"enabled": True, "path": str(blocker / "ekman.log")}}
        )
        assert logging.getLogger().handlers == []


class TestSolverEvents:
    """Test structured solver milestones."""

    def test_event_context(self, caplog_setup):
        """Test that stage, action and status land on the record."""
        log_solver_event(logging.getLogger("src.test"), "newton", "complete", "converged", kappa=0.2)
        record = caplog_setup.records[-1]
        assert record.message == "newton complete"
        assert record.stage == "newton"
        assert record.status == "converged"
        assert record.kappa == 0.2
