"""Training objectives: alignment-free CTC, label-smoothed attention
cross-entropy, and their convex combination.

CTC is a custom differentiable op: the forward/backward lattice over the
blank-interleaved target runs in log space, and the gradient with
respect to the log-probabilities is the negative state-occupancy
posterior, handed to the tape as a closed form.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import ConfigError, InfeasibleTargetError, InputError, ShapeError
from .tensor import Tensor, apply_op

__all__ = [
    "ctc_loss",
    "attention_loss",
    "combined_loss",
    "greedy_ctc_decode",
    "min_ctc_frames",
]

NEG_INF = -np.inf


def min_ctc_frames(target: Sequence[int]) -> int:
    """Fewest frames that can emit the target: its length plus one extra
    blank frame per adjacent repeated token."""
    y = list(target)
    repeats = sum(1 for i in range(1, len(y)) if y[i] == y[i - 1])
    return len(y) + repeats


def _interleave_blanks(target: Sequence[int], blank: int) -> np.ndarray:
    lab = np.full(2 * len(target) + 1, blank, dtype=np.int64)
    lab[1::2] = target
    return lab


def ctc_loss(log_probs: Tensor, target: Sequence[int], blank: int = 0) -> Tensor:
    """Negative log-probability of the target under the CTC model.

    log_probs is (T, V) with log-softmax-normalized rows (caller's
    contract).  Raises InfeasibleTargetError when T cannot fit the
    target even with minimal blanks.
    """
    if log_probs.ndim != 2:
        raise ShapeError(f"log_probs must be (T, V), got {log_probs.shape}")
    tlen, vocab = log_probs.shape
    y = list(target)
    if any(t == blank or t < 0 or t >= vocab for t in y):
        raise InputError(f"target tokens must be in [0,{vocab}) excluding blank {blank}")
    if tlen < min_ctc_frames(y):
        raise InfeasibleTargetError(
            f"{tlen} frames cannot emit a target needing {min_ctc_frames(y)}"
        )

    lab = _interleave_blanks(y, blank)
    s = lab.size
    lp = log_probs.data

    # forward lattice: alpha[t, s] = log P(prefix paths ending in state s at t)
    alpha = np.full((tlen, s), NEG_INF)
    alpha[0, 0] = lp[0, lab[0]]
    if s > 1:
        alpha[0, 1] = lp[0, lab[1]]
    # skip transition allowed into non-blank states that differ from the
    # token two states back
    can_skip = np.zeros(s, dtype=bool)
    can_skip[2:] = (lab[2:] != blank) & (lab[2:] != lab[:-2])
    for t in range(1, tlen):
        stay = alpha[t - 1]
        prev = np.full(s, NEG_INF)
        prev[1:] = alpha[t - 1, :-1]
        acc = np.logaddexp(stay, prev)
        skip = np.full(s, NEG_INF)
        skip[2:] = alpha[t - 1, :-2]
        acc = np.where(can_skip, np.logaddexp(acc, skip), acc)
        alpha[t] = acc + lp[t, lab]

    log_z = alpha[tlen - 1, s - 1]
    if s > 1:
        log_z = np.logaddexp(log_z, alpha[tlen - 1, s - 2])
    if not np.isfinite(log_z):
        raise InfeasibleTargetError("no feasible alignment has nonzero probability")

    # backward lattice: beta[t, s] = log P(completing emissions after t | state s)
    beta = np.full((tlen, s), NEG_INF)
    beta[tlen - 1, s - 1] = 0.0
    if s > 1:
        beta[tlen - 1, s - 2] = 0.0
    skip_ok = np.zeros(s, dtype=bool)
    skip_ok[:-2] = can_skip[2:]
    for t in range(tlen - 2, -1, -1):
        nxt = beta[t + 1] + lp[t + 1, lab]
        succ = np.full(s, NEG_INF)
        succ[:-1] = nxt[1:]
        acc = np.logaddexp(nxt, succ)
        skip = np.full(s, NEG_INF)
        skip[:-2] = nxt[2:]
        acc = np.where(skip_ok, np.logaddexp(acc, skip), acc)
        beta[t] = acc

    with np.errstate(invalid="ignore"):
        occupancy = np.exp(alpha + beta - log_z)  # (T, S), rows sum to 1
    occupancy[~np.isfinite(alpha + beta)] = 0.0
    grad_lp = np.zeros_like(lp)
    np.add.at(grad_lp.T, lab, occupancy.T)  # scatter states onto vocab ids

    def bwd(g):
        return (-float(g.reshape(())) * grad_lp,)

    return apply_op("ctc_loss", np.array(-log_z), (log_probs,), bwd)


def attention_loss(logits: Tensor, target: Sequence[int], smoothing: float = 0.1) -> Tensor:
    """Mean label-smoothed cross-entropy of next-token predictions.

    Smoothing mass is spread uniformly over the whole vocabulary; the
    target sequence must align 1:1 with logits rows (EOS included).
    """
    if logits.ndim != 2:
        raise ShapeError(f"logits must be (L, V), got {logits.shape}")
    llen, vocab = logits.shape
    y = np.asarray(target, dtype=np.int64)
    if y.size != llen:
        raise ShapeError(f"target length {y.size} does not match logits rows {llen}")
    if y.size < 1:
        raise InputError("attention loss needs at least one target token")
    if not 0.0 <= smoothing < 1.0:
        raise ConfigError(f"smoothing must be in [0,1), got {smoothing}")
    q = np.full((llen, vocab), smoothing / vocab)
    q[np.arange(llen), y] += 1.0 - smoothing
    lp = T.log_softmax(logits, axis=-1)
    return T.neg(T.tsum(lp * Tensor(q))) / float(llen)


def combined_loss(ctc: Tensor, att: Tensor, lam: float = 0.9) -> Tensor:
    """Convex mix: lam on the attention term, (1 - lam) on CTC."""
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"loss weight must be in [0,1], got {lam}")
    return att * lam + ctc * (1.0 - lam)


def greedy_ctc_decode(log_probs: np.ndarray, blank: int = 0) -> list[int]:
    """Frame argmax, collapse repeats, drop blanks."""
    ids = np.asarray(log_probs).argmax(axis=1)
    out: list[int] = []
    prev = -1
    for i in ids:
        if i != prev and i != blank:
            out.append(int(i))
        prev = i
    return out
