"""Model and training hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..errors import InvalidArgumentError

OUTPUT_ACTIVATIONS = ("relu", "sigmoid")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture plus training-loop hyperparameters.

    Defaults mirror the full-scale setup: 128-wide latents, 4 stacked
    encoders and decoders, 1024-wide prediction/reconstruction heads,
    dropout 0.2, 5000 warm-up steps and 10 cycles of 30 encoder-only +
    100 full epochs. Desk-scale runs shrink these via the config file.
    """

    d_model: int = 128
    n_layers: int = 4
    n_heads: int = 8
    d_ff: int = 0  # 0 -> 4 * d_model
    d_ff_head: int = 1024
    seq_len: int = 150
    feat_in: int = 25
    feat_out: int = 25
    dropout: float = 0.2
    warmup_steps: int = 5000
    output_activation: str = "relu"
    encoder_epochs_per_cycle: int = 30
    full_epochs_per_cycle: int = 100
    n_cycles: int = 10
    eps_loss: float = 0.01
    recon_weight: float = 1.0  # weight of the encoder reconstruction loss in full phases
    # fraction of chemistry input frames replaced by the model's own one-step
    # predictions during full-phase training; hardens autoregressive rollout
    # against feeding back its own outputs (0 = plain teacher forcing)
    self_conditioning: float = 0.0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise InvalidArgumentError(
                f"d_model {self.d_model} must be divisible by n_heads {self.n_heads}"
            )
        if self.d_model % 2 != 0:
            raise InvalidArgumentError("d_model must be even for sinusoidal positions")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidArgumentError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.warmup_steps < 1:
            raise InvalidArgumentError("warmup_steps must be >= 1")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise InvalidArgumentError(
                f"output_activation must be one of {OUTPUT_ACTIVATIONS}, got {self.output_activation!r}"
            )
        if self.eps_loss <= 0:
            raise InvalidArgumentError("eps_loss must be positive")
        if not 0.0 <= self.self_conditioning <= 1.0:
            raise InvalidArgumentError("self_conditioning must lie in [0, 1]")
        if self.d_ff == 0:
            object.__setattr__(self, "d_ff", 4 * self.d_model)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)
