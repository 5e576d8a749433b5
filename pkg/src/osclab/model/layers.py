"""Transformer building blocks: sinusoidal positions, scaled dot-product
attention (weights exposed), multi-head wrapper, encoder/decoder layers."""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch import Tensor

from ..errors import InvalidArgumentError, MaskError, ShapeError


def positional_encoding(seq_len: int, d_model: int, dtype: torch.dtype = torch.float32) -> Tensor:
    """Sinusoidal position matrix: PE(pos, 2i) = sin(pos / 10000^(2i/d)),
    PE(pos, 2i+1) = cos(pos / 10000^(2i/d))."""
    if d_model % 2 != 0:
        raise InvalidArgumentError(f"d_model must be even, got {d_model}")
    if seq_len < 1:
        raise InvalidArgumentError(f"seq_len must be >= 1, got {seq_len}")
    position = torch.arange(seq_len, dtype=torch.float64).unsqueeze(1)
    inv_freq = torch.exp(
        torch.arange(0, d_model, 2, dtype=torch.float64) * (-math.log(10000.0) / d_model)
    )
    pe = torch.zeros(seq_len, d_model, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(position * inv_freq)
    pe[:, 1::2] = torch.cos(position * inv_freq)
    return pe.to(dtype)


def attention(q: Tensor, k: Tensor, v: Tensor, mask: Tensor | None = None) -> tuple[Tensor, Tensor]:
    """Scaled dot-product attention.

    q: (..., Lq, dk), k: (..., Lk, dk), v: (..., Lk, dv).
    mask: boolean (Lq, Lk) or broadcastable; True means the query may attend
    that key. Returns (output, weights); weight rows sum to 1.
    """
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"query/key dims differ: {q.shape[-1]} vs {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeError(f"key/value lengths differ: {k.shape[-2]} vs {v.shape[-2]}")
    scores = q @ k.transpose(-2, -1) / math.sqrt(q.shape[-1])
    if mask is not None:
        if mask.shape[-2:] != (q.shape[-2], k.shape[-2]):
            raise ShapeError(
                f"mask shape {tuple(mask.shape[-2:])} does not match (query_len, key_len)"
                f" = ({q.shape[-2]}, {k.shape[-2]})"
            )
        if not bool(mask.any(dim=-1).all()):
            raise MaskError("a query row is fully masked; nothing to attend to")
        scores = scores.masked_fill(~mask, float("-inf"))
    weights = F.softmax(scores, dim=-1)
    return weights @ v, weights


class MultiHeadAttention(nn.Module):
    """Standard multi-head attention that also returns per-head weights."""

    def __init__(self, d_model: int, n_heads: int, dropout: float):
        super().__init__()
        if d_model % n_heads != 0:
            raise InvalidArgumentError(f"d_model {d_model} not divisible by {n_heads} heads")
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)
        self.drop = nn.Dropout(dropout)

    def _split(self, x: Tensor) -> Tensor:
        # (B, L, d_model) -> (B, H, L, d_head)
        b, l, _ = x.shape
        return x.view(b, l, self.n_heads, self.d_head).transpose(1, 2)

    def forward(self, query: Tensor, key: Tensor, value: Tensor, mask: Tensor | None = None):
        b, lq, d = query.shape
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(key))
        v = self._split(self.v_proj(value))
        out, weights = attention(q, k, v, mask)
        out = self.drop(out)  # dropout on the value mix; reported weights stay clean
        out = out.transpose(1, 2).contiguous().view(b, lq, d)
        return self.out_proj(out), weights


class FeedForward(nn.Module):
    def __init__(self, d_model: int, d_ff: int, dropout: float):
        super().__init__()
        self.lin1 = nn.Linear(d_model, d_ff)
        self.lin2 = nn.Linear(d_ff, d_model)
        self.drop = nn.Dropout(dropout)

    def forward(self, x: Tensor) -> Tensor:
        return self.lin2(self.drop(F.relu(self.lin1(x))))


class EncoderLayer(nn.Module):
    def __init__(self, d_model: int, n_heads: int, d_ff: int, dropout: float):
        super().__init__()
        self.self_attn = MultiHeadAttention(d_model, n_heads, dropout)
        self.ffn = FeedForward(d_model, d_ff, dropout)
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)
        self.drop1 = nn.Dropout(dropout)
        self.drop2 = nn.Dropout(dropout)

    def forward(self, x: Tensor):
        a, weights = self.self_attn(x, x, x)
        x = self.norm1(x + self.drop1(a))
        x = self.norm2(x + self.drop2(self.ffn(x)))
        return x, weights


class DecoderLayer(nn.Module):
    def __init__(self, d_model: int, n_heads: int, d_ff: int, dropout: float):
        super().__init__()
        self.self_attn = MultiHeadAttention(d_model, n_heads, dropout)
        self.cross_attn = MultiHeadAttention(d_model, n_heads, dropout)
        self.ffn = FeedForward(d_model, d_ff, dropout)
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)
        self.norm3 = nn.LayerNorm(d_model)
        self.drop1 = nn.Dropout(dropout)
        self.drop2 = nn.Dropout(dropout)
        self.drop3 = nn.Dropout(dropout)

    def forward(self, x: Tensor, memory: Tensor, causal_mask: Tensor):
        a, self_w = self.self_attn(x, x, x, causal_mask)
        x = self.norm1(x + self.drop1(a))
        c, cross_w = self.cross_attn(x, memory, memory)
        x = self.norm2(x + self.drop2(c))
        x = self.norm3(x + self.drop3(self.ffn(x)))
        return x, self_w, cross_w


def causal_mask(seq_len: int, device=None) -> Tensor:
    """Lower-triangular boolean mask: position t may attend positions <= t."""
    return torch.ones(seq_len, seq_len, dtype=torch.bool, device=device).tril()
