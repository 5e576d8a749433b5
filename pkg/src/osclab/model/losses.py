"""The max-scaled mean squared error.

The oscillation signal is zero most of the time; dividing each timestep's
MSE by that timestep's largest true value makes the rare pulses dominate
the gradient instead of drowning in quiet frames. A floor of eps on the
denominator bounds the amplification during fully-quiet timesteps.
"""

from __future__ import annotations

import torch
from torch import Tensor

from ..errors import InvalidDataError, ShapeError


def scaled_mse(y_true: Tensor, y_pred: Tensor, eps: float = 0.01) -> Tensor:
    """mean over t of [ mean_c (y_true - y_pred)^2 / max(max_c y_true[t], eps) ].

    Accepts (seq_len, cells) or (batch, seq_len, cells); differentiable.
    """
    if eps <= 0:
        raise InvalidDataError(f"eps must be positive, got {eps}")
    y_true = torch.as_tensor(y_true)
    y_pred = torch.as_tensor(y_pred)
    if y_true.shape != y_pred.shape:
        raise ShapeError(f"shape mismatch: {tuple(y_true.shape)} vs {tuple(y_pred.shape)}")
    if not (torch.isfinite(y_true).all() and torch.isfinite(y_pred).all()):
        raise InvalidDataError("scaled_mse got non-finite input")
    mse_t = ((y_true - y_pred) ** 2).mean(dim=-1)
    denom_t = y_true.max(dim=-1).values.clamp_min(eps)
    return (mse_t / denom_t).mean()
