"""Threshold-gated pair selection between the two modalities.

Both streams pass through their own BiLSTM, every audio-visual frame
pair gets a similarity score, weak and negative pairs are pruned below
a threshold, and the surviving, row-normalized weights mix the other
modality's frames back in residually.  A frame whose whole row is
pruned keeps its original features (identity fallback) instead of being
polluted with uncorrelated frames.
"""

from __future__ import annotations

import math

import numpy as np

from . import nn, tensor as T
from .errors import ConfigError, ShapeError
from .tensor import Tensor, uniform_init

__all__ = ["connection_strength", "prune_normalize", "Tbsm"]


def connection_strength(v_lstm: Tensor, a_lstm: Tensor, w1_v: Tensor, w1_a: Tensor):
    """All-pair similarity matrices between projected streams.

    beta_va[i, j] scores visual frame i against audio frame j, scaled by
    1/sqrt(width); beta_av is its exact transpose.
    """
    if v_lstm.shape != a_lstm.shape:
        raise ShapeError(f"stream shapes disagree: {v_lstm.shape} vs {a_lstm.shape}")
    width = v_lstm.shape[1]
    beta_va = ((v_lstm @ w1_v) @ T.transpose(a_lstm @ w1_a)) * (1.0 / math.sqrt(width))
    beta_av = T.transpose(beta_va)
    return beta_va, beta_av


def prune_normalize(beta: Tensor, tau: float) -> Tensor:
    """ReLU, row-normalize, drop entries below tau, row-normalize again.

    The threshold applies to the normalized values, so tau is a floor on
    a frame's share of attention, not on raw similarity.  Rows that lose
    every entry stay all-zero rather than being renormalized.
    """
    if tau < 0:
        raise ConfigError(f"threshold must be nonnegative, got {tau}")
    g = T.row_l1_normalize(T.relu(beta))
    return T.row_l1_normalize(T.threshold_keep(g, tau))


class Tbsm(nn.Module):
    """BiLSTMs, pair pruning, residual aggregation, and sum fusion."""

    def __init__(self, rng: np.random.Generator, d1: int, tau: float = 0.095):
        super().__init__()
        if tau < 0:
            raise ConfigError(f"threshold must be nonnegative, got {tau}")
        self.tau = tau
        width = 2 * d1
        self.lstm_a = nn.BiLSTM(rng, d1, d1)
        self.lstm_v = nn.BiLSTM(rng, d1, d1)
        self.w1_v = Tensor(uniform_init(rng, (width, width), width), requires_grad=True)
        self.w1_a = Tensor(uniform_init(rng, (width, width), width), requires_grad=True)
        # The exchange projections start small so the residual mixing is a
        # gentle perturbation at init; the module then grows the exchange
        # only where training finds it useful, instead of forcing early
        # optimization to undo a large random cross-modal injection.
        self.w2_v = Tensor(0.1 * uniform_init(rng, (width, width), width), requires_grad=True)
        self.w2_a = Tensor(0.1 * uniform_init(rng, (width, width), width), requires_grad=True)
        self.fuse_a = nn.Linear(rng, width, width)
        self.fuse_v = nn.Linear(rng, width, width)

    def aggregate(self, a_lstm: Tensor, v_lstm: Tensor, gamma_va: Tensor, gamma_av: Tensor):
        """Residual cross-modal mixing; all-zero gamma rows fall back to
        the original frame exactly."""
        a_psp = gamma_av @ (v_lstm @ self.w2_v) + a_lstm
        v_psp = gamma_va @ (a_lstm @ self.w2_a) + v_lstm
        return a_psp, v_psp

    def forward(
        self,
        audio: Tensor,
        visual: Tensor,
        select: bool = True,
        return_gammas: bool = False,
    ):
        a_lstm = self.lstm_a(audio)
        v_lstm = self.lstm_v(visual)
        if select:
            beta_va, beta_av = connection_strength(v_lstm, a_lstm, self.w1_v, self.w1_a)
            gamma_va = prune_normalize(beta_va, self.tau)
            gamma_av = prune_normalize(beta_av, self.tau)
            a_psp, v_psp = self.aggregate(a_lstm, v_lstm, gamma_va, gamma_av)
        else:
            gamma_va = gamma_av = None
            a_psp, v_psp = a_lstm, v_lstm
        fused = self.fuse_a(a_psp) + self.fuse_v(v_psp)
        if return_gammas:
            return fused, gamma_va, gamma_av
        return fused
