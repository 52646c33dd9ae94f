"""Sequence backend: fused features down to model width, a small
convolution-augmented Transformer encoder, and a causal decoder.

Encoder layers follow the macaron pattern: half-step feed-forward,
self-attention, a depthwise temporal conv module, and a second
half-step feed-forward, each pre-normalized with a residual, plus a
closing layer norm.  Positions are fixed sinusoids added at entry.
"""

from __future__ import annotations

import numpy as np

from . import nn, tensor as T
from .errors import ShapeError
from .tensor import Tensor, uniform_init

__all__ = ["ProjectF0", "ConformerEncoder", "TransformerDecoder", "causal_mask"]


class ProjectF0(nn.Module):
    """Fused (T1, 2*D1) -> (T1, D1/2) through two linears with a ReLU."""

    def __init__(self, rng: np.random.Generator, d1: int):
        super().__init__()
        if d1 % 2:
            raise ShapeError(f"feature width {d1} must be even")
        self.lin0 = nn.Linear(rng, 2 * d1, d1)
        self.lin1 = nn.Linear(rng, d1, d1 // 2)

    def forward(self, fusion: Tensor) -> Tensor:
        return self.lin1(T.relu(self.lin0(fusion)))


class _FeedForward(nn.Module):
    def __init__(self, rng, dim: int, hidden: int):
        super().__init__()
        self.lin0 = nn.Linear(rng, dim, hidden)
        self.lin1 = nn.Linear(rng, hidden, dim)

    def forward(self, x: Tensor) -> Tensor:
        return self.lin1(T.relu(self.lin0(x)))


class _DepthwiseConv(nn.Module):
    """Per-channel temporal conv, width 3, zero padding, as shifted sums."""

    def __init__(self, rng, dim: int, width: int = 3):
        super().__init__()
        self.width = width
        self.kernel = Tensor(uniform_init(rng, (width, dim), width), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        tlen, dim = x.shape
        pad = self.width // 2
        zeros = Tensor(np.zeros((pad, dim)))
        xp = T.concat([zeros, x, zeros], axis=0)
        out = xp[0:tlen] * self.kernel[0]
        for j in range(1, self.width):
            out = out + xp[j : j + tlen] * self.kernel[j]
        return out


class _ConvModule(nn.Module):
    """Pointwise expand -> GLU gate -> depthwise conv -> pointwise."""

    def __init__(self, rng, dim: int):
        super().__init__()
        self.norm = nn.LayerNorm(dim)
        self.pw0 = nn.Linear(rng, dim, 2 * dim)
        self.depth = _DepthwiseConv(rng, dim)
        self.pw1 = nn.Linear(rng, dim, dim)

    def forward(self, x: Tensor) -> Tensor:
        h = self.pw0(self.norm(x))
        dim = x.shape[1]
        gated = h[:, :dim] * T.sigmoid(h[:, dim:])
        return self.pw1(T.relu(self.depth(gated)))


class _ConformerBlock(nn.Module):
    def __init__(self, rng, dim: int, heads: int, ff_hidden: int):
        super().__init__()
        self.ff0 = _FeedForward(rng, dim, ff_hidden)
        self.norm_ff0 = nn.LayerNorm(dim)
        self.attn = nn.MultiHeadAttention(rng, dim, heads)
        self.norm_attn = nn.LayerNorm(dim)
        self.conv = _ConvModule(rng, dim)
        self.ff1 = _FeedForward(rng, dim, ff_hidden)
        self.norm_ff1 = nn.LayerNorm(dim)
        self.norm_out = nn.LayerNorm(dim)

    def forward(self, x: Tensor) -> Tensor:
        x = x + self.ff0(self.norm_ff0(x)) * 0.5
        h = self.norm_attn(x)
        x = x + self.attn(h, h, h)
        x = x + self.conv(x)
        x = x + self.ff1(self.norm_ff1(x)) * 0.5
        return self.norm_out(x)


class ConformerEncoder(nn.Module):
    def __init__(self, rng: np.random.Generator, dim: int, layers: int = 2, heads: int = 2, ff_mult: int = 4):
        super().__init__()
        self.dim = dim
        self.layers = layers
        for i in range(layers):
            setattr(self, f"block{i}", _ConformerBlock(rng, dim, heads, ff_mult * dim))

    def forward(self, f0: Tensor) -> Tensor:
        x = f0 + Tensor(nn.sinusoidal_positions(f0.shape[0], self.dim))
        for i in range(self.layers):
            x = getattr(self, f"block{i}")(x)
        return x


def causal_mask(length: int) -> np.ndarray:
    """Additive mask: 0 on and below the diagonal, large negative above."""
    return np.where(np.tril(np.ones((length, length))) > 0, 0.0, -1e9)


class _DecoderBlock(nn.Module):
    def __init__(self, rng, dim: int, heads: int, ff_hidden: int):
        super().__init__()
        self.norm_self = nn.LayerNorm(dim)
        self.self_attn = nn.MultiHeadAttention(rng, dim, heads)
        self.norm_cross = nn.LayerNorm(dim)
        self.cross_attn = nn.MultiHeadAttention(rng, dim, heads)
        self.norm_ff = nn.LayerNorm(dim)
        self.ff = _FeedForward(rng, dim, ff_hidden)

    def forward(self, x: Tensor, memory: Tensor, mask: np.ndarray) -> Tensor:
        h = self.norm_self(x)
        x = x + self.self_attn(h, h, h, mask=mask)
        x = x + self.cross_attn(self.norm_cross(x), memory, memory)
        return x + self.ff(self.norm_ff(x))


class TransformerDecoder(nn.Module):
    """Autoregressive decoder over tokens, cross-attending to encoder output."""

    def __init__(
        self,
        rng: np.random.Generator,
        vocab: int,
        dim: int,
        layers: int = 2,
        heads: int = 2,
        ff_mult: int = 4,
    ):
        super().__init__()
        self.vocab = vocab
        self.dim = dim
        self.layers = layers
        self.embed = nn.Embedding(rng, vocab, dim)
        for i in range(layers):
            setattr(self, f"block{i}", _DecoderBlock(rng, dim, heads, ff_mult * dim))
        self.norm_out = nn.LayerNorm(dim)
        self.head = nn.Linear(rng, dim, vocab)

    def forward(self, token_ids, memory: Tensor) -> Tensor:
        ids = np.asarray(token_ids, dtype=np.int64)
        if ids.ndim != 1 or ids.size < 1:
            raise ShapeError("decoder input must be a nonempty 1-d id sequence")
        x = self.embed(ids) * float(np.sqrt(self.dim)) + Tensor(
            nn.sinusoidal_positions(ids.size, self.dim)
        )
        mask = causal_mask(ids.size)
        for i in range(self.layers):
            x = getattr(self, f"block{i}")(x, memory, mask)
        return self.head(self.norm_out(x))
