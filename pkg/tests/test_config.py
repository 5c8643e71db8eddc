import pytest
from pydantic import ValidationError

from shared.config import Settings, get_settings


def test_defaults():
    settings = Settings(_env_file=None)
    assert settings.CHECK_THREADS == 1
    assert settings.TOLERANCE_SCALE == 1.0
    assert settings.OUTPUT_DIR == "out"


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("CHECK_THREADS", "4")
    monkeypatch.setenv("LOG_LEVEL", "debug")
    settings = get_settings()
    assert settings.CHECK_THREADS == 4
    assert settings.LOG_LEVEL == "DEBUG"
    assert get_settings() is settings


def test_invalid_values():
    with pytest.raises(ValidationError):
        Settings(_env_file=None, LOG_LEVEL="chatty")
    with pytest.raises(ValidationError):
        Settings(_env_file=None, TOLERANCE_SCALE=0.0)
