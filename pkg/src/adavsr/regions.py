"""Audio-enhanced visual branch: grid-region pooling plus additive
attention conditioned on the coarse audio stream.

Each frame's spatial map is split into a sqrt(k) x sqrt(k) grid of mean
pooled cells; an additive attention scored by the frame's audio vector
picks out the regions that move with the sound.
"""

from __future__ import annotations

import math

import numpy as np

from . import nn, tensor as T
from .errors import InputError, ShapeError
from .tensor import Tensor, uniform_init

__all__ = ["partition_regions", "Avrm"]


def partition_regions(f_v: Tensor, k: int) -> Tensor:
    """(T1, C1, H1, W1) -> (T1, k, C1): disjoint grid cells, mean pooled."""
    if f_v.ndim != 4:
        raise ShapeError(f"expected (T1, C1, H1, W1), got {f_v.shape}")
    g = math.isqrt(k)
    if g * g != k:
        raise InputError(f"region count {k} is not a perfect square")
    t1, c1, h1, w1 = f_v.shape
    if h1 % g or w1 % g:
        raise InputError(f"spatial dims ({h1},{w1}) not divisible by grid size {g}")
    ch, cw = h1 // g, w1 // g
    x = T.reshape(f_v, (t1, c1, g, ch, g, cw))
    x = T.tmean(T.tmean(x, axis=5), axis=3)  # (t1, c1, g, g)
    return T.transpose(T.reshape(x, (t1, c1, k)), (0, 2, 1))


class Avrm(nn.Module):
    """Additive attention over k pooled regions, audio-conditioned.

    Scores: e_t = tanh(regions_t @ W1 + 1 (f_a2_t @ W2)) @ w3, softmaxed
    over regions; the broadcast audio term is identical across a frame's
    k regions by construction.  The mixed region vector is projected
    C1 -> D1 at the end.
    """

    def __init__(self, rng: np.random.Generator, c1: int, d1: int, k: int = 9, d_att: int = 16):
        super().__init__()
        g = math.isqrt(k)
        if g * g != k:
            raise InputError(f"region count {k} is not a perfect square")
        self.k = k
        self.w1 = Tensor(uniform_init(rng, (c1, d_att), c1), requires_grad=True)
        self.w2 = Tensor(uniform_init(rng, (c1, d_att), c1), requires_grad=True)
        self.w3 = Tensor(uniform_init(rng, (d_att, 1), d_att), requires_grad=True)
        self.proj = nn.Linear(rng, c1, d1)

    def attend(self, f_a2: Tensor, regions: Tensor):
        """Returns (weights (T1,k), mixed (T1,C1)) before projection."""
        if f_a2.shape[0] != regions.shape[0]:
            raise ShapeError(
                f"stream lengths disagree: audio {f_a2.shape[0]} vs regions {regions.shape[0]}"
            )
        t1, k, c1 = regions.shape
        d_att = self.w1.shape[1]
        keys = T.reshape(T.reshape(regions, (t1 * k, c1)) @ self.w1, (t1, k, d_att))
        query = T.expand(f_a2 @ self.w2, 1, k)  # same row broadcast over regions
        scores = T.reshape(T.reshape(T.tanh(keys + query), (t1 * k, d_att)) @ self.w3, (t1, k))
        weights = T.softmax(scores, axis=-1)
        mixed = T.tsum(T.expand(weights, 2, c1) * regions, axis=1)
        return weights, mixed

    def forward(self, f_a2: Tensor, f_v: Tensor, return_weights: bool = False):
        regions = partition_regions(f_v, self.k) if f_v.ndim == 4 else f_v
        weights, mixed = self.attend(f_a2, regions)
        enhanced = self.proj(mixed)
        if return_weights:
            return enhanced, weights
        return enhanced
