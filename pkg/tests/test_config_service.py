"""Tests for INI loading and validation of command configs."""

from pathlib import Path

import pytest

from riskbias.config_service import (
    OUTPUT_DIR_ENV,
    BiasConfig,
    ConfidenceConfig,
    EnvelopeConfig,
    load_config,
    resolve_output,
)
from riskbias.errors import ConfigError


@pytest.fixture
def ini(tmp_path):
    def write(text: str) -> Path:
        path = tmp_path / "figures.ini"
        path.write_text(text, encoding='utf-8')
        return path
    return write


class TestLoadConfig:
    def test_defaults_without_file(self):
        config = load_config("bias")
        assert isinstance(config, BiasConfig)
        assert config.M == [1, 2, 4, 8]
        assert config.seed == 0

    def test_lists_and_case(self, ini):
        path = ini("[envelope]\nN = 40\nk = 10\nk_alpha = 0.25, 1.0\n")
        config = load_config("envelope", path)
        assert isinstance(config, EnvelopeConfig)
        assert config.N == 40
        assert config.k_alpha == [0.25, 1.0]

    def test_overrides_win(self, ini):
        path = ini("[bias]\nseed = 3\n")
        assert load_config("bias", path, overrides={"seed": 9, "threads": None}).seed == 9
        assert load_config("bias", path, overrides={"seed": None}).seed == 3

    def test_missing_section_uses_defaults(self, ini):
        config = load_config("confidence", ini("[bias]\nk = 4\n"))
        assert isinstance(config, ConfidenceConfig)
        assert config.functional == "loo"

    def test_all_problems_reported(self, ini):
        path = ini("[envelope]\nN = 5\nk = 10\nbogus = 1\n")
        with pytest.raises(ConfigError) as info:
            load_config("envelope", path)
        assert any("bogus" in message for message in info.value.errors)

    def test_dense_regime_required(self, ini):
        with pytest.raises(ConfigError):
            load_config("compare-vc", ini("[compare-vc]\nN = 5\nk = 10\n"))

    def test_seed_range(self):
        with pytest.raises(ConfigError):
            load_config("bias", overrides={"seed": -1})
        with pytest.raises(ConfigError):
            load_config("bias", overrides={"seed": 2**64})

    def test_confidence_needs_enough_reps(self, ini):
        with pytest.raises(ConfigError):
            load_config("confidence", ini("[confidence]\nreps = 50\n"))

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config("bias", tmp_path / "missing.ini")

    def test_unknown_command(self):
        with pytest.raises(ConfigError):
            load_config("plot")


class TestResolveOutput:
    def test_default_name(self, monkeypatch):
        monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
        assert resolve_output(None, "bias") == Path("bias.csv")

    def test_output_dir(self, monkeypatch, tmp_path):
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
        assert resolve_output(Path("run/a.csv"), "bias") == tmp_path / "run" / "a.csv"
        assert resolve_output(tmp_path / "b.csv", "bias") == tmp_path / "b.csv"
