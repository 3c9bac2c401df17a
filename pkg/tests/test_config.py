from pathlib import Path

import pytest

from haar_fluctuations.config import DEFAULT_SEED, Paths, Settings, get_settings


def test_defaults(monkeypatch):
    monkeypatch.delenv("HAAR_OUT_DIR")
    settings = Settings.from_env()
    assert settings.seed == DEFAULT_SEED
    assert settings.threads == 1
    assert settings.out_dir == Path("out")
    assert settings.log_level == "INFO"


def test_environment_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("HAAR_SEED", "42")
    monkeypatch.setenv("HAAR_THREADS", "3")
    monkeypatch.setenv("HAAR_LOG_LEVEL", "debug")
    settings = Settings.from_env()
    assert settings.seed == 42
    assert settings.threads == 3
    assert settings.log_level == "DEBUG"
    assert settings.out_dir == tmp_path / "out"


@pytest.mark.parametrize(
    "name, value",
    [
        ("HAAR_SEED", "abc"),
        ("HAAR_SEED", "-1"),
        ("HAAR_THREADS", "0"),
        ("HAAR_LOG_LEVEL", "LOUD"),
    ],
)
def test_invalid_environment(monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(ValueError):
        Settings.from_env()


def test_settings_are_cached(monkeypatch):
    first = get_settings()
    monkeypatch.setenv("HAAR_SEED", "7")
    assert get_settings() is first
    get_settings.cache_clear()
    assert get_settings().seed == 7


def test_figure_config_path():
    assert Paths().figure_config("fig2") == Path("configs") / "fig2.json"
