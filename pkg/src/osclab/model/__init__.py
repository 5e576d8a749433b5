"""World model: the modified encoder-decoder transformer and its training,
rollout, checkpointing and evaluation machinery."""

from .config import ModelConfig
from .layers import attention, positional_encoding
from .transformer import (
    AttentionMaps,
    ForwardOutput,
    SurrogateTransformer,
    build_model,
    decoder_forward,
    encoder_forward,
    model_forward,
)
from .losses import scaled_mse
from .schedule import lr_schedule
from .checkpoint import Checkpoint, load_checkpoint, restore_model, save_checkpoint
from .training import EpochStats, cyclic_train, write_history_csv
from .rollout import rollout, rollout_batched
from .evaluate import evaluate_phase_window

__all__ = [
    "AttentionMaps",
    "Checkpoint",
    "EpochStats",
    "ForwardOutput",
    "ModelConfig",
    "SurrogateTransformer",
    "attention",
    "build_model",
    "cyclic_train",
    "decoder_forward",
    "encoder_forward",
    "evaluate_phase_window",
    "load_checkpoint",
    "lr_schedule",
    "model_forward",
    "positional_encoding",
    "restore_model",
    "rollout",
    "rollout_batched",
    "save_checkpoint",
    "scaled_mse",
    "write_history_csv",
]
