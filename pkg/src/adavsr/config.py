"""Experiment configuration: one flat dataclass, key=value files."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError

__all__ = ["ExperimentConfig", "paper_preset"]

_ENCODINGS = ("dual", "time_only", "freq_only")


@dataclass
class ExperimentConfig:
    # model widths
    d1: int = 32  # channel width shared by the audio/visual encoders
    model_dim: int = 16  # sequence backend width (must be d1 // 2)
    k_regions: int = 9
    tau: float = 0.095
    d_att: int = 16
    enc_layers: int = 2
    enc_heads: int = 2
    dec_layers: int = 2
    dec_heads: int = 2
    ff_mult: int = 4
    vocab_size: int = 12

    # module toggles and audio-stream wiring
    use_avrm: bool = True
    use_cmnsm: bool = True
    use_tbsm: bool = True
    encoding: str = "dual"  # dual | time_only | freq_only

    # optimization
    lam: float = 0.9  # attention weight in the combined loss
    lr_scale: float = 1.0
    warmup: int = 400
    epochs: int = 4
    batch_size: int = 8
    grad_clip: float = 5.0
    seed: int = 0

    # data
    n_train: int = 64
    n_eval: int = 32
    t0: int = 24
    h0: int = 24
    w0: int = 24
    n_mels: int = 40
    n_fft: int = 400
    hop: int = 160
    train_snrs: str = "-5,0,5,10,15"
    noise_prob: float = 0.5

    def validate(self) -> "ExperimentConfig":
        if self.encoding not in _ENCODINGS:
            raise ConfigError(f"encoding must be one of {_ENCODINGS}, got {self.encoding!r}")
        if self.model_dim * 2 != self.d1:
            raise ConfigError(f"model_dim must be d1/2, got {self.model_dim} vs d1={self.d1}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"loss weight must be in [0,1], got {self.lam}")
        if self.tau < 0:
            raise ConfigError(f"selection threshold must be non-negative, got {self.tau}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        return self

    def train_snr_list(self) -> list[float]:
        return [float(s) for s in self.train_snrs.split(",") if s.strip()]

    # -- flat key=value round trip -------------------------------------------

    def to_file(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for f in fields(self):
                v = getattr(self, f.name)
                if isinstance(v, bool):
                    v = "true" if v else "false"
                elif isinstance(v, float):
                    v = repr(v)
                fh.write(f"{f.name}={v}\n")

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        raw: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, value = line.split("=", 1)
                raw[key.strip()] = value.strip()
        return cls.from_flat(raw)

    @classmethod
    def from_flat(cls, raw: dict[str, str]) -> "ExperimentConfig":
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(raw) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, text in raw.items():
            ftype = known[key]
            try:
                if ftype == "bool":
                    if text.lower() not in ("true", "false"):
                        raise ValueError(text)
                    kwargs[key] = text.lower() == "true"
                elif ftype == "int":
                    kwargs[key] = int(text)
                elif ftype == "float":
                    kwargs[key] = float(text)
                else:
                    kwargs[key] = text
            except ValueError:
                raise ConfigError(f"config key {key} has malformed value {text!r}") from None
        return cls(**kwargs).validate()


def paper_preset() -> ExperimentConfig:
    """Full-size hyperparameters: 6-layer encoder/decoder, width 256."""
    return ExperimentConfig(
        d1=512,
        model_dim=256,
        enc_layers=6,
        enc_heads=4,
        dec_layers=6,
        dec_heads=4,
    )
