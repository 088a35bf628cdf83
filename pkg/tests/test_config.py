import logging

import pytest

from config import Settings, load_config, setup_logging
from errors import ModelInputError


def test_load_config_defaults(monkeypatch):
    for name in ("THREADS", "SEED", "TAX_RATE", "LOG_LEVEL", "LOG_FILE"):
        monkeypatch.delenv(f"LEVERAGE_{name}", raising=False)
    monkeypatch.setattr("config.load_dotenv", lambda: None)
    settings = load_config()
    assert settings.threads == 1
    assert settings.seed == 20131231
    assert settings.tax_rate == pytest.approx(0.35)
    assert settings.log_level == "INFO"
    assert settings.log_file is None


def test_load_config_reads_environment(monkeypatch):
    monkeypatch.setattr("config.load_dotenv", lambda: None)
    monkeypatch.setenv("LEVERAGE_THREADS", "4")
    monkeypatch.setenv("LEVERAGE_LOG_LEVEL", "debug")
    settings = load_config()
    assert settings.threads == 4
    assert settings.log_level == "DEBUG"


def test_load_config_rejects_bad_values(monkeypatch):
    monkeypatch.setattr("config.load_dotenv", lambda: None)
    monkeypatch.setenv("LEVERAGE_TAX_RATE", "2")
    with pytest.raises(ModelInputError):
        load_config()


def test_settings_reject_unknown_log_level():
    with pytest.raises(ValueError):
        Settings(log_level="CHATTY")


def test_setup_logging_writes_to_file(tmp_path):
    log_file = tmp_path / "run.log"
    setup_logging("INFO", str(log_file))
    logging.getLogger("calibration").info("calibration converged")
    logging.getLogger("calibration").debug("iteration detail")
    for handler in logging.getLogger().handlers:
        handler.flush()
    text = log_file.read_text(encoding="utf-8")
    assert "INFO - calibration converged" in text
    assert "iteration detail" not in text
    setup_logging("WARNING")


def test_setup_logging_unknown_level():
    with pytest.raises(ModelInputError):
        setup_logging("LOUD")
