"""Training loop: Adam with the Noam schedule, per-sample tapes with
batch gradient accumulation, length-sorted first epoch, checkpointing."""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import ExperimentConfig
from .data import RawSample, add_noise_snr
from .errors import ConfigError, NumericError
from .frontend import stft_logmel
from .model import AvsrModel
from .tensor import Tensor, backward

__all__ = [
    "noam_lr",
    "Adam",
    "epoch_order",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "TrainReport",
]


def noam_lr(step: int, model_dim: int, warmup: int, scale: float = 1.0) -> float:
    """Inverse-sqrt schedule with a linear warmup ramp."""
    if step < 1:
        raise ConfigError(f"schedule step must be >= 1, got {step}")
    return scale * model_dim**-0.5 * min(step**-0.5, step * warmup**-1.5)


class Adam:
    def __init__(self, params: list[tuple[str, Tensor]], beta1=0.9, beta2=0.98, eps=1e-9):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {n: np.zeros_like(p.data) for n, p in params}
        self.v = {n: np.zeros_like(p.data) for n, p in params}
        self.t = 0

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, p in self.params:
            if p.grad is None:
                continue
            g = p.grad
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            m_hat = self.m[name] / (1 - b1**self.t)
            v_hat = self.v[name] / (1 - b2**self.t)
            p.data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _clip_gradients(params, max_norm: float) -> None:
    if max_norm <= 0:
        return
    total = 0.0
    for _, p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad**2))
    norm = np.sqrt(total)
    if norm > max_norm:
        ratio = max_norm / norm
        for _, p in params:
            if p.grad is not None:
                p.grad *= ratio


@dataclass
class TrainReport:
    steps: int
    epoch_losses: list[float] = field(default_factory=list)
    wall_seconds: float = 0.0


def epoch_order(samples: list[RawSample], epoch: int, rng: np.random.Generator) -> list[int]:
    """Sample visit order: the first epoch runs shortest-first as an
    easy-first curriculum; later epochs shuffle."""
    if epoch == 0:
        return sorted(range(len(samples)), key=lambda i: (len(samples[i].transcript), i))
    return rng.permutation(len(samples)).tolist()


def _augmented_views(sample: RawSample, config: ExperimentConfig, rng: np.random.Generator):
    """Maybe replace the audio with a noisy view; video stays clean."""
    snrs = config.train_snr_list()
    if snrs and config.noise_prob > 0 and rng.random() < config.noise_prob:
        snr = snrs[int(rng.integers(len(snrs)))]
        wave = add_noise_snr(sample.waveform, snr, seed=int(rng.integers(2**31)))
        logmel = stft_logmel(wave, n_fft=config.n_fft, hop=config.hop, n_mels=config.n_mels)
        return wave, logmel
    return None, None


def train(
    config: ExperimentConfig,
    samples: list[RawSample],
    out_dir: str | None = None,
    on_epoch: Callable[[int, AvsrModel, float], None] | None = None,
) -> tuple[AvsrModel, TrainReport]:
    """Train a fresh model; identical config and data give identical runs.

    ``on_epoch(epoch, model, mean_loss)`` is invoked after each epoch,
    e.g. for progress reporting; it must not mutate the model.
    """
    config.validate()
    if not samples:
        raise ConfigError("training set is empty")
    t_start = time.perf_counter()
    model = AvsrModel(config)
    model.train()
    params = list(model.named_parameters())
    opt = Adam(params)
    rng = np.random.default_rng(config.seed)
    report = TrainReport(steps=0)

    for epoch in range(config.epochs):
        order = epoch_order(samples, epoch, rng)
        epoch_loss, n_seen = 0.0, 0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            model.zero_grad()
            step_id = opt.t + 1
            try:
                for idx in batch:
                    smp = samples[idx]
                    wave, logmel = _augmented_views(smp, config, rng)
                    loss = model.loss(smp, waveform=wave, logmel=logmel)
                    value = loss.item()
                    if not np.isfinite(value):
                        raise NumericError(f"loss is {value}")
                    backward(loss / float(len(batch)))
                    epoch_loss += value
                    n_seen += 1
            except NumericError as e:
                raise NumericError(
                    f"training diverged at optimizer step {step_id} "
                    f"(epoch {epoch}, sample {idx}): {e}"
                ) from e
            _clip_gradients(params, config.grad_clip)
            lr = noam_lr(step_id, config.model_dim, config.warmup, config.lr_scale)
            opt.step(lr)
        report.steps = opt.t
        report.epoch_losses.append(epoch_loss / max(n_seen, 1))
        if on_epoch is not None:
            on_epoch(epoch, model, report.epoch_losses[-1])

    report.wall_seconds = time.perf_counter() - t_start
    if out_dir is not None:
        save_checkpoint(out_dir, model, report)
    return model, report


def save_checkpoint(out_dir: str, model: AvsrModel, report: TrainReport | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    np.savez(os.path.join(out_dir, "params.npz"), **model.state_arrays())
    model.config.to_file(os.path.join(out_dir, "config.txt"))
    meta = {
        "seed": model.config.seed,
        "parameters": model.num_parameters(),
        "steps": report.steps if report else 0,
        "epoch_losses": report.epoch_losses if report else [],
        "wall_seconds": report.wall_seconds if report else 0.0,
    }
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def load_checkpoint(ckpt_dir: str) -> AvsrModel:
    config = ExperimentConfig.from_file(os.path.join(ckpt_dir, "config.txt"))
    model = AvsrModel(config)
    with np.load(os.path.join(ckpt_dir, "params.npz")) as arrays:
        model.load_state_arrays(dict(arrays))
    model.eval()
    return model
