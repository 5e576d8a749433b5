"""The modified encoder-decoder transformer.

Differences from the translation original: dense projections replace the
embeddings on both sides, the output softmax is replaced by a regression
head (relu or sigmoid), the encoder grows a second head trained to
reconstruct its motor input so the decoder cannot get away with ignoring
actuation, and training alternates encoder-only and full phases (see
training.cyclic_train).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch import Tensor

from ..errors import ShapeError
from .config import ModelConfig
from .layers import DecoderLayer, EncoderLayer, causal_mask, positional_encoding


@dataclass
class AttentionMaps:
    """Per-layer, per-head attention weights; every row sums to 1."""

    encoder_self: list[Tensor]
    decoder_self: list[Tensor]
    decoder_cross: list[Tensor]

    def all_maps(self) -> list[Tensor]:
        return [*self.encoder_self, *self.decoder_self, *self.decoder_cross]


@dataclass
class ForwardOutput:
    """One forward pass: next-state prediction, encoder's motor
    reconstruction (clamped to [-1, 1] at this interface), the decoder's
    final hidden states, and attention maps when collected.

    reconstruction_raw keeps the unclamped elu output; losses use it.
    """

    prediction: Tensor
    reconstruction: Tensor
    decoder_hidden: Tensor
    attention: AttentionMaps | None
    reconstruction_raw: Tensor


class SurrogateTransformer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        d, cfg = config.d_model, config
        self.motor_proj = nn.Linear(cfg.feat_in, d)
        self.chem_proj = nn.Linear(cfg.feat_out, d)
        self.register_buffer("pos", positional_encoding(cfg.seq_len, d), persistent=False)
        self.in_drop = nn.Dropout(cfg.dropout)
        self.encoder = nn.ModuleList(
            EncoderLayer(d, cfg.n_heads, cfg.d_ff, cfg.dropout) for _ in range(cfg.n_layers)
        )
        self.decoder = nn.ModuleList(
            DecoderLayer(d, cfg.n_heads, cfg.d_ff, cfg.dropout) for _ in range(cfg.n_layers)
        )
        self.recon_hidden = nn.Linear(d, cfg.d_ff_head)
        self.recon_out = nn.Linear(cfg.d_ff_head, cfg.feat_in)
        self.pred_hidden = nn.Linear(d, cfg.d_ff_head)
        self.pred_out = nn.Linear(cfg.d_ff_head, cfg.feat_out)

    # -- sub-passes ---------------------------------------------------------

    def _embed(self, x: Tensor, proj: nn.Linear, what: str) -> Tensor:
        if x.shape[-1] != proj.in_features:
            raise ShapeError(f"{what} feature width {x.shape[-1]} != {proj.in_features}")
        if x.shape[-2] > self.config.seq_len:
            raise ShapeError(
                f"{what} length {x.shape[-2]} exceeds configured seq_len {self.config.seq_len}"
            )
        h = proj(x) + self.pos[: x.shape[-2]].to(x.dtype)
        return self.in_drop(h)

    def encode(self, motors: Tensor, collect_attention: bool = False):
        """Motor window -> (memory, raw reconstruction, self-attention maps)."""
        h = self._embed(motors, self.motor_proj, "motors")
        maps = []
        for layer in self.encoder:
            h, w = layer(h)
            if collect_attention:
                maps.append(w)
        recon = self.recon_out(F.relu(self.recon_hidden(h)))
        recon = F.elu(recon)
        return h, recon, maps

    def decode(self, chem_in: Tensor, memory: Tensor, collect_attention: bool = False):
        """Chemistry window + encoder memory -> (prediction, hidden, maps).

        Self-attention is causally masked; timestep t only sees chem_in[:t+1].
        """
        if memory.shape[-1] != self.config.d_model:
            raise ShapeError(f"memory width {memory.shape[-1]} != d_model {self.config.d_model}")
        if memory.shape[:-1] != chem_in.shape[:-1]:
            raise ShapeError(
                f"memory length {tuple(memory.shape[:-1])} does not match chem input"
                f" {tuple(chem_in.shape[:-1])}"
            )
        h = self._embed(chem_in, self.chem_proj, "chem")
        mask = causal_mask(h.shape[-2], device=h.device)
        self_maps, cross_maps = [], []
        for layer in self.decoder:
            h, sw, cw = layer(h, memory, mask)
            if collect_attention:
                self_maps.append(sw)
                cross_maps.append(cw)
        pred = self.pred_out(F.relu(self.pred_hidden(h)))
        if self.config.output_activation == "relu":
            pred = F.relu(pred)
        else:
            pred = torch.sigmoid(pred)
        return pred, h, self_maps, cross_maps

    def forward(self, motors: Tensor, chem_in: Tensor, collect_attention: bool = False) -> ForwardOutput:
        memory, recon_raw, enc_maps = self.encode(motors, collect_attention)
        pred, hidden, self_maps, cross_maps = self.decode(chem_in, memory, collect_attention)
        maps = AttentionMaps(enc_maps, self_maps, cross_maps) if collect_attention else None
        return ForwardOutput(
            prediction=pred,
            reconstruction=recon_raw.clamp(-1.0, 1.0),
            decoder_hidden=hidden,
            attention=maps,
            reconstruction_raw=recon_raw,
        )


def build_model(config: ModelConfig, seed: int = 0) -> SurrogateTransformer:
    """Construct a model with seed-controlled Glorot-uniform weights and zero
    biases, so two builds from the same seed are identical.

    The relu prediction head starts with a small positive output bias: on a
    mostly-zero target signal a zero-biased relu head can be pushed into the
    all-negative regime early and never recover.
    """
    model = SurrogateTransformer(config)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for module in model.modules():
            if isinstance(module, nn.Linear):
                fan_in, fan_out = module.in_features, module.out_features
                bound = math.sqrt(6.0 / (fan_in + fan_out))
                module.weight.uniform_(-bound, bound, generator=gen)
                module.bias.zero_()
        if config.output_activation == "relu":
            model.pred_out.bias.fill_(0.1)
    return model


# -- stateless wrappers over a model instance -------------------------------


def _with_mode(model: nn.Module, train_mode: bool):
    class _Ctx:
        def __enter__(self):
            self.was_training = model.training
            model.train(train_mode)
            return model

        def __exit__(self, *exc):
            model.train(self.was_training)
            return False

    return _Ctx()


def _batched(x: Tensor) -> tuple[Tensor, bool]:
    if x.dim() == 2:
        return x.unsqueeze(0), True
    return x, False


def encoder_forward(model: SurrogateTransformer, motors, train_mode: bool = False):
    """Motor window -> (memory, reconstruction in [-1, 1]). Accepts
    (seq_len, feat) or batched (B, seq_len, feat)."""
    motors = torch.as_tensor(motors, dtype=torch.float32)
    motors, squeeze = _batched(motors)
    with _with_mode(model, train_mode), torch.no_grad():
        memory, recon_raw, _ = model.encode(motors)
    recon = recon_raw.clamp(-1.0, 1.0)
    if squeeze:
        return memory.squeeze(0), recon.squeeze(0)
    return memory, recon


def decoder_forward(model: SurrogateTransformer, chem_in, memory, train_mode: bool = False):
    """Chemistry window + memory -> (prediction, decoder_hidden, attention maps)."""
    chem_in = torch.as_tensor(chem_in, dtype=torch.float32)
    memory = torch.as_tensor(memory, dtype=torch.float32)
    chem_in, squeeze = _batched(chem_in)
    memory, _ = _batched(memory)
    with _with_mode(model, train_mode), torch.no_grad():
        pred, hidden, self_maps, cross_maps = model.decode(chem_in, memory, collect_attention=True)
    maps = AttentionMaps([], self_maps, cross_maps)
    if squeeze:
        return pred.squeeze(0), hidden.squeeze(0), maps
    return pred, hidden, maps


def model_forward(model: SurrogateTransformer, motors, chem_in, train_mode: bool = False) -> ForwardOutput:
    """Full pass; reconstruction always populated, attention maps collected."""
    motors = torch.as_tensor(motors, dtype=torch.float32)
    chem_in = torch.as_tensor(chem_in, dtype=torch.float32)
    motors, squeeze = _batched(motors)
    chem_in, _ = _batched(chem_in)
    with _with_mode(model, train_mode), torch.no_grad():
        out = model(motors, chem_in, collect_attention=True)
    if squeeze:
        return ForwardOutput(
            prediction=out.prediction.squeeze(0),
            reconstruction=out.reconstruction.squeeze(0),
            decoder_hidden=out.decoder_hidden.squeeze(0),
            attention=out.attention,
            reconstruction_raw=out.reconstruction_raw.squeeze(0),
        )
    return out
