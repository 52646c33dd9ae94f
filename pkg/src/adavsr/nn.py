"""Layer library: parameter containers over the autodiff core.

Modules register parameters (trained tensors) and buffers (running
statistics, positional tables) by attribute assignment.  All
initialization draws from an explicit ``numpy`` Generator so that model
construction is reproducible from a single seed.
"""

from __future__ import annotations

import math
from typing import Iterator, Optional

import numpy as np

from . import tensor as T
from .errors import ShapeError
from .tensor import Tensor, uniform_init

__all__ = [
    "Module",
    "Linear",
    "Conv1d",
    "Conv2d",
    "BatchNorm1d",
    "LayerNorm",
    "Embedding",
    "LSTM",
    "BiLSTM",
    "MultiHeadAttention",
    "sinusoidal_positions",
]


class Module:
    """Base class: tracks parameters, buffers, submodules, train mode."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "_modules", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Module):
            self._modules[name] = value
        elif isinstance(value, Tensor) and value.requires_grad:
            self._params[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, m in self._modules.items():
            yield from m.named_parameters(prefix + name + ".")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name, b in self._buffers.items():
            yield prefix + name, b
        for name, m in self._modules.items():
            yield from m.named_buffers(prefix + name + ".")

    def train(self, mode: bool = True) -> "Module":
        object.__setattr__(self, "training", mode)
        for m in self._modules.values():
            m.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


class Linear(Module):
    def __init__(self, rng: np.random.Generator, in_dim: int, out_dim: int, bias: bool = True):
        super().__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = Tensor(uniform_init(rng, (in_dim, out_dim), in_dim), requires_grad=True)
        self.bias = (
            Tensor(uniform_init(rng, (out_dim,), in_dim), requires_grad=True) if bias else None
        )

    def forward(self, x: Tensor) -> Tensor:
        return T.linear(x, self.weight, self.bias)


class Conv1d(Module):
    """Temporal convolution over (T, Cin) sequences."""

    def __init__(
        self,
        rng: np.random.Generator,
        in_ch: int,
        out_ch: int,
        width: int,
        stride: int = 1,
        padding: int = 0,
        bias: bool = True,
    ):
        super().__init__()
        self.stride = stride
        self.padding = padding
        fan_in = width * in_ch
        self.kernel = Tensor(uniform_init(rng, (width, in_ch, out_ch), fan_in), requires_grad=True)
        self.bias = (
            Tensor(uniform_init(rng, (out_ch,), fan_in), requires_grad=True) if bias else None
        )

    def forward(self, x: Tensor) -> Tensor:
        out = T.conv1d(x, self.kernel, stride=self.stride, padding=self.padding)
        if self.bias is not None:
            out = out + self.bias
        return out


class Conv2d(Module):
    """Spatial convolution over (N, Cin, H, W) stacks."""

    def __init__(
        self,
        rng: np.random.Generator,
        in_ch: int,
        out_ch: int,
        size: int,
        stride: int = 1,
        padding: int = 0,
        bias: bool = True,
    ):
        super().__init__()
        self.stride = stride
        self.padding = padding
        fan_in = size * size * in_ch
        self.kernel = Tensor(uniform_init(rng, (size, size, in_ch, out_ch), fan_in), requires_grad=True)
        self.bias = (
            Tensor(uniform_init(rng, (out_ch,), fan_in), requires_grad=True) if bias else None
        )

    def forward(self, x: Tensor) -> Tensor:
        out = T.conv2d(x, self.kernel, stride=self.stride, padding=self.padding)
        if self.bias is not None:
            n, c, h, w = out.shape
            flat = T.reshape(T.transpose(out, (0, 2, 3, 1)), (n * h * w, c)) + self.bias
            out = T.transpose(T.reshape(flat, (n, h, w, c)), (0, 3, 1, 2))
        return out


class BatchNorm1d(Module):
    """Channel-wise batch norm for (T, C) activations; tracks running stats."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.register_buffer("running_mean", np.zeros(channels))
        self.register_buffer("running_var", np.ones(channels))

    def forward(self, x: Tensor) -> Tensor:
        return T.batch_norm(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            training=self.training,
            momentum=self.momentum,
            eps=self.eps,
        )


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gamma, self.beta, eps=self.eps)


class Embedding(Module):
    def __init__(self, rng: np.random.Generator, vocab: int, dim: int):
        super().__init__()
        self.table = Tensor(rng.standard_normal((vocab, dim)) * (1.0 / math.sqrt(dim)), requires_grad=True)

    def forward(self, ids) -> Tensor:
        return T.embedding(self.table, ids)


class LSTM(Module):
    """Single-direction LSTM over a (T, D) sequence; returns (T, H).

    Gate layout in the packed weight matrices is [input, forget, cell,
    output].  The forget-gate bias starts at +1 so memory persists early
    in training.
    """

    def __init__(self, rng: np.random.Generator, in_dim: int, hidden: int):
        super().__init__()
        self.hidden = hidden
        self.w_x = Tensor(uniform_init(rng, (in_dim, 4 * hidden), in_dim), requires_grad=True)
        self.w_h = Tensor(uniform_init(rng, (hidden, 4 * hidden), hidden), requires_grad=True)
        b = uniform_init(rng, (4 * hidden,), hidden)
        b[hidden : 2 * hidden] += 1.0
        self.bias = Tensor(b, requires_grad=True)

    def forward(self, x: Tensor, reverse: bool = False) -> Tensor:
        tlen, _ = x.shape
        H = self.hidden
        order = range(tlen - 1, -1, -1) if reverse else range(tlen)
        # input contributions to the gates don't depend on the recurrence
        gates_x = x @ self.w_x + self.bias
        h = Tensor(np.zeros((1, H)))
        c = Tensor(np.zeros((1, H)))
        outs: list[Optional[Tensor]] = [None] * tlen
        for t in order:
            gates = gates_x[t : t + 1] + h @ self.w_h
            i = T.sigmoid(gates[:, 0:H])
            f = T.sigmoid(gates[:, H : 2 * H])
            g = T.tanh(gates[:, 2 * H : 3 * H])
            o = T.sigmoid(gates[:, 3 * H : 4 * H])
            c = f * c + i * g
            h = o * T.tanh(c)
            outs[t] = h
        return T.concat([o_ for o_ in outs], axis=0)


class BiLSTM(Module):
    """Bidirectional wrapper: concatenates forward and backward passes."""

    def __init__(self, rng: np.random.Generator, in_dim: int, hidden: int):
        super().__init__()
        self.fwd = LSTM(rng, in_dim, hidden)
        self.bwd = LSTM(rng, in_dim, hidden)

    def forward(self, x: Tensor) -> Tensor:
        return T.concat([self.fwd(x), self.bwd(x, reverse=True)], axis=1)


class MultiHeadAttention(Module):
    """Scaled dot-product attention with ``heads`` parallel projections.

    ``mask``, when given, is a (Tq, Tk) float array added to the logits;
    use large negative entries to forbid positions (they underflow to
    exactly zero weight after the stabilized softmax).
    """

    def __init__(self, rng: np.random.Generator, dim: int, heads: int):
        super().__init__()
        if dim % heads:
            raise ShapeError(f"attention dim {dim} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.dh = dim // heads
        self.w_q = Linear(rng, dim, dim)
        self.w_k = Linear(rng, dim, dim)
        self.w_v = Linear(rng, dim, dim)
        self.w_o = Linear(rng, dim, dim)

    def forward(self, query: Tensor, key: Tensor, value: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        tq = query.shape[0]
        tk = key.shape[0]
        q = self.w_q(query)
        k = self.w_k(key)
        v = self.w_v(value)
        scale = 1.0 / math.sqrt(self.dh)
        head_outs = []
        for h in range(self.heads):
            sl = slice(h * self.dh, (h + 1) * self.dh)
            scores = (q[:, sl] @ T.transpose(k[:, sl])) * scale
            if mask is not None:
                scores = scores + Tensor(mask)
            w = T.softmax(scores, axis=-1)
            head_outs.append(w @ v[:, sl])
        return self.w_o(T.concat(head_outs, axis=1))


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    """Fixed sin/cos position table, shape (length, dim); dim must be even."""
    if dim % 2:
        raise ShapeError(f"position dim must be even, got {dim}")
    pos = np.arange(length)[:, None].astype(np.float64)
    i = np.arange(0, dim, 2).astype(np.float64)
    angles = pos / np.power(10000.0, i / dim)
    pe = np.zeros((length, dim))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe
