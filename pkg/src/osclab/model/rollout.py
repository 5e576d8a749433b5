"""Autoregressive prediction: slide fixed-length motor/chemistry windows
forward one step at a time, feeding the model its own final-timestep
prediction as the next chemistry frame."""

from __future__ import annotations

import numpy as np
import torch

from ..errors import InvalidArgumentError, ShapeError
from .transformer import SurrogateTransformer


def rollout_batched(model: SurrogateTransformer, motors, chem_seed, horizon: int) -> np.ndarray:
    """motors: (B, T, feat), chem_seed: (B, seq_len, feat) -> (B, horizon, feat).

    Requires T >= seq_len + horizon - 1 so every step has a full motor window.
    """
    if horizon < 1:
        raise InvalidArgumentError(f"horizon must be >= 1, got {horizon}")
    motors = torch.as_tensor(np.asarray(motors), dtype=torch.float32)
    chem = torch.as_tensor(np.asarray(chem_seed), dtype=torch.float32)
    if motors.dim() != 3 or chem.dim() != 3:
        raise ShapeError("rollout_batched expects (B, T, feat) motors and (B, seq_len, feat) seed")
    seq_len = chem.shape[1]
    if motors.shape[1] < seq_len + horizon - 1:
        raise InvalidArgumentError(
            f"motor series of {motors.shape[1]} frames cannot cover seq_len {seq_len} + horizon {horizon} - 1"
        )
    was_training = model.training
    model.eval()
    out = []
    with torch.no_grad():
        for i in range(horizon):
            window = motors[:, i : i + seq_len]
            pred, _, _, _ = model.decode(chem, model.encode(window)[0])
            nxt = pred[:, -1]
            out.append(nxt)
            chem = torch.cat([chem[:, 1:], nxt.unsqueeze(1)], dim=1)
    model.train(was_training)
    return torch.stack(out, dim=1).numpy()


def rollout(model: SurrogateTransformer, motors, chem_seed, horizon: int) -> np.ndarray:
    """Unbatched rollout: motors (T, feat), chem_seed (seq_len, feat) ->
    (horizon, feat) predicted chemistry frames."""
    motors = np.asarray(motors, dtype=np.float32)
    chem_seed = np.asarray(chem_seed, dtype=np.float32)
    if motors.ndim != 2 or chem_seed.ndim != 2:
        raise ShapeError("rollout expects (T, feat) motors and (seq_len, feat) seed")
    return rollout_batched(model, motors[None], chem_seed[None], horizon)[0]
