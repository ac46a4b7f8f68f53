"""
Tests for src/utils/logger_config.py — the shared "sde" logging root
"""
import logging

import pytest

import src.part3.bank_solver  # noqa: F401  (creates "sde.BankSolver" at import)
from src.utils.errors import ConfigError
from src.utils.logger_config import (ROOT_NAME, configure_logging, console_level, setup_solver_logger)


@pytest.fixture
def saved_root():
    """Put the session's root handlers back after a forced reconfiguration."""
    root = logging.getLogger(ROOT_NAME)
    handlers, level = root.handlers[:], root.level
    root.handlers = []
    yield root
    for handler in root.handlers:
        handler.close()
    root.handlers = handlers
    root.setLevel(level)


class TestStageLoggers:
    """Stage loggers hang off one configured root."""

    def test_named_under_root(self):
        """setup_solver_logger("Equilibrium") is the "sde.Equilibrium" logger."""
        logger = setup_solver_logger("Equilibrium")
        assert logger.name == "sde.Equilibrium"
        assert logger.parent is logging.getLogger(ROOT_NAME)

    def test_stage_loggers_carry_no_handlers(self):
        """Records reach the root handlers by propagation; stage loggers add none."""
        stage = logging.getLogger("sde.BankSolver")
        assert stage.handlers == []
        assert stage.hasHandlers()

    def test_repeated_setup_adds_nothing(self):
        """Asking for loggers again leaves the root with the same handlers."""
        root = logging.getLogger(ROOT_NAME)
        before = list(root.handlers)
        setup_solver_logger("MarketSolver")
        setup_solver_logger("MarketSolver")
        configure_logging()
        assert root.handlers == before


class TestConfigureLogging:
    """Fresh configuration of the root."""

    def test_one_file_and_one_console_handler(self, saved_root, tmp_path):
        """A forced setup leaves exactly a trace file handler and a stdout handler."""
        configure_logging(log_file=str(tmp_path / "trace.log"), force=True)
        kinds = sorted(type(h).__name__ for h in saved_root.handlers)
        assert kinds == ["FileHandler", "StreamHandler"]
        assert saved_root.level == logging.DEBUG

    def test_trace_file_receives_debug_records(self, saved_root, tmp_path):
        """DEBUG lines reach the trace file with the stage name."""
        path = tmp_path / "trace.log"
        configure_logging(log_file=str(path), force=True)
        setup_solver_logger("Oracle").debug("bisection step 3")
        for handler in saved_root.handlers:
            handler.flush()
        assert "| sde.Oracle | DEBUG | bisection step 3" in path.read_text(encoding="utf-8")

    def test_trace_file_created_lazily(self, saved_root, tmp_path):
        """Nothing is written until the first record."""
        path = tmp_path / "quiet.log"
        configure_logging(log_file=str(path), force=True)
        assert not path.exists()

    def test_log_file_from_environment(self, saved_root, tmp_path, monkeypatch):
        """SDE_LOG_FILE names the trace file when no path is passed."""
        path = tmp_path / "env.log"
        monkeypatch.setenv("SDE_LOG_FILE", str(path))
        configure_logging(force=True)
        setup_solver_logger("Scenario").info("loaded")
        for handler in saved_root.handlers:
            handler.flush()
        assert "loaded" in path.read_text(encoding="utf-8")

    def test_console_threshold_from_environment(self, saved_root, tmp_path, monkeypatch):
        """SDE_LOG_LEVEL=WARNING raises the console threshold, the file stays at DEBUG."""
        monkeypatch.setenv("SDE_LOG_LEVEL", "warning")
        configure_logging(log_file=str(tmp_path / "trace.log"), force=True)
        levels = {type(h).__name__: h.level for h in saved_root.handlers}
        assert levels == {"FileHandler": logging.DEBUG, "StreamHandler": logging.WARNING}


class TestConsoleLevel:
    """SDE_LOG_LEVEL parsing."""

    def test_default_is_info(self, monkeypatch):
        """Unset, the console shows INFO and above."""
        monkeypatch.delenv("SDE_LOG_LEVEL", raising=False)
        assert console_level() == logging.INFO

    def test_unknown_level_refused(self, monkeypatch):
        """A name logging does not know is a configuration error."""
        monkeypatch.setenv("SDE_LOG_LEVEL", "LOUD")
        with pytest.raises(ConfigError, match="SDE_LOG_LEVEL"):
            console_level()
