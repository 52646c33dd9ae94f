"""End-to-end model assembly: frontends, enhancement modules, backend.

Module toggles control construction, so parameter counts reflect what a
variant actually uses.  The stream wiring is controlled by `encoding`:

- dual:       time-domain audio feeds the mask module and the audio
              branch; frequency-domain audio queries the region module.
- time_only:  the time-domain stream feeds both enhancement modules.
- freq_only:  the frequency-domain stream feeds both.

The selection trunk (BiLSTMs + fusion) always runs; its toggle only
switches the cross-modal selection on or off, so switching it off
yields the plain pass-through baseline path.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .config import ExperimentConfig
from .data import BOS_ID, EOS_ID, RawSample
from .errors import ConfigError
from .frontend import FreqDomainEncoder, TimeDomainEncoder, VisualEncoder
from .losses import attention_loss, combined_loss, ctc_loss, greedy_ctc_decode
from .masking import Cmnsm, pool_spatial
from .regions import Avrm
from .selection import Tbsm
from .sequence import ConformerEncoder, ProjectF0, TransformerDecoder
from .tensor import log_softmax, no_grad

__all__ = ["AvsrModel"]


def _module_rng(seed: int, slot: int) -> np.random.Generator:
    # one generator per module slot, so toggling one module does not
    # shift the initial weights of the others
    return np.random.default_rng([seed, slot])


class AvsrModel(nn.Module):
    def __init__(self, config: ExperimentConfig):
        super().__init__()
        config.validate()
        self.config = config
        d1 = config.d1

        if config.encoding == "time_only":
            self.audio_src, self.query_src = "time", "time"
        elif config.encoding == "freq_only":
            self.audio_src, self.query_src = "freq", "freq"
        else:
            self.audio_src, self.query_src = "time", "freq"

        need_time = self.audio_src == "time" or (config.use_avrm and self.query_src == "time")
        need_freq = self.audio_src == "freq" or (config.use_avrm and self.query_src == "freq")

        self.visual_enc = VisualEncoder(_module_rng(config.seed, 0), channels=d1)
        self.time_enc = (
            TimeDomainEncoder(_module_rng(config.seed, 1), channels=d1) if need_time else None
        )
        self.freq_enc = (
            FreqDomainEncoder(_module_rng(config.seed, 2), n_mels=config.n_mels, channels=d1)
            if need_freq
            else None
        )
        self.cmnsm = Cmnsm(_module_rng(config.seed, 3), d1, d1) if config.use_cmnsm else None
        self.avrm = (
            Avrm(_module_rng(config.seed, 4), d1, d1, k=config.k_regions, d_att=config.d_att)
            if config.use_avrm
            else None
        )
        self.tbsm = Tbsm(_module_rng(config.seed, 5), d1, tau=config.tau)
        self.project = ProjectF0(_module_rng(config.seed, 6), d1)
        self.encoder = ConformerEncoder(
            _module_rng(config.seed, 7),
            config.model_dim,
            layers=config.enc_layers,
            heads=config.enc_heads,
            ff_mult=config.ff_mult,
        )
        self.decoder = TransformerDecoder(
            _module_rng(config.seed, 8),
            config.vocab_size,
            config.model_dim,
            layers=config.dec_layers,
            heads=config.dec_heads,
            ff_mult=config.ff_mult,
        )
        self.ctc_head = nn.Linear(_module_rng(config.seed, 9), config.model_dim, config.vocab_size)

    # -- forward pieces --------------------------------------------------

    def _streams(self, frames: np.ndarray, waveform: np.ndarray, logmel: np.ndarray):
        f_v = self.visual_enc(np.asarray(frames, dtype=np.float64))
        t1 = f_v.shape[0]
        streams = {}
        if self.time_enc is not None:
            streams["time"] = self.time_enc(np.asarray(waveform, dtype=np.float64))
        if self.freq_enc is not None:
            streams["freq"] = self.freq_enc(np.asarray(logmel, dtype=np.float64), t_out=t1)
        return f_v, streams

    def encode(self, frames: np.ndarray, waveform: np.ndarray, logmel: np.ndarray) -> Tensor:
        """Map one utterance to the backend memory (T1, model_dim)."""
        f_v, streams = self._streams(frames, waveform, logmel)

        audio = streams[self.audio_src]
        if self.cmnsm is not None:
            audio = self.cmnsm(audio, f_v)

        if self.avrm is not None:
            visual = self.avrm(streams[self.query_src], f_v)
        else:
            visual = pool_spatial(f_v)

        fused = self.tbsm(audio, visual, select=self.config.use_tbsm)
        return self.encoder(self.project(fused))

    def ctc_log_probs(self, memory: Tensor) -> Tensor:
        return log_softmax(self.ctc_head(memory), axis=1)

    # -- training and inference ------------------------------------------

    def loss(self, sample: RawSample, waveform=None, logmel=None) -> Tensor:
        """Combined loss for one utterance; pass corrupted views of the
        audio to train on augmented inputs while keeping the transcript."""
        wave = sample.waveform if waveform is None else waveform
        mel = sample.logmel if logmel is None else logmel
        memory = self.encode(sample.frames, wave, mel)
        ctc = ctc_loss(self.ctc_log_probs(memory), sample.transcript)
        dec_in = [BOS_ID] + list(sample.transcript)
        dec_target = list(sample.transcript) + [EOS_ID]
        att = attention_loss(self.decoder(dec_in, memory), dec_target)
        return combined_loss(ctc, att, self.config.lam)

    def transcribe(self, frames, waveform, logmel) -> list[int]:
        was_training = self.training
        self.eval()
        try:
            with no_grad():
                memory = self.encode(frames, waveform, logmel)
                lp = self.ctc_log_probs(memory).data
        finally:
            if was_training:
                self.train()
        return greedy_ctc_decode(lp)

    # -- checkpointing -----------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {f"param.{n}": t.data for n, t in self.named_parameters()}
        out.update({f"buffer.{n}": b for n, b in self.named_buffers()})
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        own: dict[str, np.ndarray] = {f"param.{n}": t.data for n, t in self.named_parameters()}
        own.update({f"buffer.{n}": b for n, b in self.named_buffers()})
        missing = set(own) - set(arrays)
        extra = set(arrays) - set(own)
        if missing or extra:
            raise ConfigError(
                f"checkpoint does not match model (missing {sorted(missing)[:3]}, "
                f"unexpected {sorted(extra)[:3]})"
            )
        for name, target in own.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != target.shape:
                raise ConfigError(
                    f"checkpoint array {name} has shape {arr.shape}, expected {target.shape}"
                )
            target[...] = arr
