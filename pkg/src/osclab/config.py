"""Run configuration: an INI-style file with one section per pipeline stage,
mirroring the dataclass fields of the stage it feeds. CLI flags override
file values; unknown sections or keys are rejected by name."""

from __future__ import annotations

import configparser
from pathlib import Path

from .errors import InvalidArgumentError


class ConfigError(InvalidArgumentError):
    """Bad configuration file or overrides; message names the offender."""


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "data": {
        "experiments": (int, 50),
        "steps": (int, 600),
        "seed": (int, 0),
        "omega0": (float, 0.35),
        "kappa": (float, 0.25),
        "omega_b": (float, 0.02),
        "pulse_sharpness": (int, 8),
        "hold_min": (int, 40),
        "hold_max": (int, 80),
    },
    "model": {
        "d_model": (int, 128),
        "n_layers": (int, 4),
        "n_heads": (int, 8),
        "d_ff": (int, 0),
        "d_ff_head": (int, 1024),
        "seq_len": (int, 150),
        "dropout": (float, 0.2),
        "warmup_steps": (int, 5000),
        "output_activation": (str, "relu"),
        "encoder_epochs_per_cycle": (int, 30),
        "full_epochs_per_cycle": (int, 100),
        "n_cycles": (int, 10),
        "eps_loss": (float, 0.01),
        "recon_weight": (float, 1.0),
        "self_conditioning": (float, 0.0),
    },
    "train": {
        "batch_size": (int, 64),
        "sample_every": (int, 8),
        "stride": (int, 1),
        "skip": (int, 0),  # drop this many leading frames of every experiment
        "seed": (int, 0),
    },
    "ga": {
        "pop_size": (int, 512),
        "n_elite": (int, 50),
        "n_generations": (int, 100),
        "mutation_rate": (float, 0.05),
        "rollout_horizon": (int, 150),
        "seed": (int, 0),
        "input_speed": (float, 1.0),
    },
    "rl": {
        "hidden": (int, 1024),
        "objective": (str, "maximize"),
        "lr": (float, 1e-4),
        "episodes": (int, 20),
        "episode_len": (int, 150),
        "seed": (int, 0),
        "input_mode": (str, "hidden"),
    },
    "upscale": {
        "n": (int, 25),
        "steps": (int, 100),
        "seed": (int, 0),
        "png": (_bool, False),
        "chunk_size": (int, 256),
    },
    "serve": {
        "host": (str, "127.0.0.1"),
        "port": (int, 8000),
    },
}


def defaults() -> dict[str, dict]:
    return {section: {k: v for k, (_, v) in keys.items()} for section, keys in SCHEMA.items()}


def load_config(path=None) -> dict[str, dict]:
    """Parse and validate a config file on top of the defaults."""
    cfg = defaults()
    if path is None:
        return cfg
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}] in {path}")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}] of {path}")
            typ = SCHEMA[section][key][0]
            try:
                cfg[section][key] = typ(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {exc}") from exc
    return cfg


def apply_overrides(cfg: dict[str, dict], section: str, **flags) -> dict[str, dict]:
    """Merge non-None CLI flag values into one section; flags win."""
    for key, value in flags.items():
        if value is None:
            continue
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} for section [{section}]")
        cfg[section][key] = value
    return cfg
