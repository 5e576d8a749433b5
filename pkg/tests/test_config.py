import pytest

from osclab.config import ConfigError, SCHEMA, apply_overrides, defaults, load_config
from osclab.errors import InvalidArgumentError
from osclab.model import ModelConfig


def test_defaults_cover_every_schema_key():
    cfg = defaults()
    assert set(cfg) == set(SCHEMA)
    for section, keys in SCHEMA.items():
        assert set(cfg[section]) == set(keys)
    assert cfg["model"]["d_model"] == 128
    assert cfg["ga"]["pop_size"] == 512
    assert cfg["train"]["batch_size"] == 64


def test_load_config_merges_over_defaults(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[model]\nd_model = 64\n[ga]\npop_size = 32\n")
    cfg = load_config(path)
    assert cfg["model"]["d_model"] == 64
    assert cfg["model"]["n_layers"] == 4  # untouched default
    assert cfg["ga"]["pop_size"] == 32


def test_load_config_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.ini")


def test_load_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[model]\nd_modle = 64\n")
    with pytest.raises(ConfigError, match="d_modle"):
        load_config(path)


def test_load_config_rejects_bad_value(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[model]\nd_model = soon\n")
    with pytest.raises(ConfigError, match="d_model"):
        load_config(path)


def test_load_config_parses_bools(tmp_path):
    path = tmp_path / "up.ini"
    path.write_text("[upscale]\npng = yes\n")
    assert load_config(path)["upscale"]["png"] is True
    path.write_text("[upscale]\npng = maybe\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_apply_overrides_flags_win():
    cfg = defaults()
    apply_overrides(cfg, "ga", pop_size=16, n_elite=None)
    assert cfg["ga"]["pop_size"] == 16
    assert cfg["ga"]["n_elite"] == 50  # None flags leave file/default values
    with pytest.raises(ConfigError, match="wibble"):
        apply_overrides(cfg, "ga", wibble=3)


def test_model_config_validation():
    with pytest.raises(InvalidArgumentError):
        ModelConfig(d_model=30, n_heads=4)  # not divisible
    with pytest.raises(InvalidArgumentError):
        ModelConfig(dropout=1.0)
    with pytest.raises(InvalidArgumentError):
        ModelConfig(warmup_steps=0)
    with pytest.raises(InvalidArgumentError):
        ModelConfig(output_activation="tanh")
    assert ModelConfig(d_model=32).d_ff == 128  # 0 -> 4 * d_model


def test_model_config_round_trip():
    cfg = ModelConfig(d_model=64, n_layers=2, n_heads=4, seq_len=80)
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg
