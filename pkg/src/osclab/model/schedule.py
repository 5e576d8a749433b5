"""Warm-up learning-rate schedule: linear ramp for warmup steps, then
inverse square-root decay. The warmup branch is computed as
(step / warmup) * warmup^-0.5 so both branches agree bit-for-bit at
step == warmup."""

from __future__ import annotations

from ..errors import InvalidArgumentError


def lr_schedule(step: int, d_model: int, warmup: int) -> float:
    """d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)."""
    if step < 1:
        raise InvalidArgumentError(f"step must be >= 1, got {step}")
    if d_model < 1 or warmup < 1:
        raise InvalidArgumentError("d_model and warmup must be >= 1")
    decay = step**-0.5
    ramp = (step / warmup) * warmup**-0.5
    return d_model**-0.5 * min(decay, ramp)
