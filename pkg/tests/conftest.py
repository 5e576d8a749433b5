import numpy as np
import pytest
import torch

from osclab.model import ModelConfig, build_model


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


@pytest.fixture
def tiny_config() -> ModelConfig:
    return ModelConfig(
        d_model=8,
        n_layers=1,
        n_heads=2,
        d_ff=16,
        d_ff_head=16,
        seq_len=6,
        feat_in=3,
        feat_out=3,
        dropout=0.0,
        warmup_steps=10,
    )


@pytest.fixture
def tiny_model(tiny_config):
    return build_model(tiny_config, seed=7)


@pytest.fixture
def small_config() -> ModelConfig:
    """25-cell model small enough for per-test training."""
    return ModelConfig(
        d_model=16,
        n_layers=1,
        n_heads=2,
        d_ff=32,
        d_ff_head=32,
        seq_len=12,
        dropout=0.0,
        warmup_steps=50,
        encoder_epochs_per_cycle=2,
        full_epochs_per_cycle=4,
        n_cycles=1,
    )


def rand_batchlike(rng: np.random.Generator, b: int, l: int, f: int) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=(b, l, f)).astype(np.float32)
