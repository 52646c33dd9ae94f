"""Desk-scale audio-visual speech recognition.

Dual-stream audio encoding, cross-modal enhancement of both streams,
threshold-gated pair selection, and a hybrid CTC/attention sequence
backend, all on a small numpy-backed autodiff core.
"""

from .errors import (
    AdavsrError,
    ConfigError,
    InfeasibleTargetError,
    InputError,
    NumericError,
    ShapeError,
)
from .config import ExperimentConfig, paper_preset
from .data import CorpusSpec, RawSample, generate_corpus, read_corpus, write_corpus
from .model import AvsrModel
from .tensor import Tensor, finite_diff_check, no_grad
from .training import load_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "AdavsrError",
    "ShapeError",
    "InputError",
    "ConfigError",
    "NumericError",
    "InfeasibleTargetError",
    "Tensor",
    "no_grad",
    "finite_diff_check",
    "ExperimentConfig",
    "paper_preset",
    "CorpusSpec",
    "RawSample",
    "generate_corpus",
    "write_corpus",
    "read_corpus",
    "AvsrModel",
    "train",
    "load_checkpoint",
    "__version__",
]
