"""Feature frontends: two audio encodings of one waveform, plus a
spatial-preserving visual encoder.

The two audio streams are deliberately asymmetric.  The time-domain
stream keeps fine-grained per-frame detail; the frequency-domain stream
is averaged over 25-frame blocks and repeated, so each frame carries
coarser, more redundant information.  Video runs at 25 fps against
16 kHz audio, hence the fixed 640 samples per video frame.
"""

from __future__ import annotations

import numpy as np

from . import nn, tensor as T
from .errors import InputError, ShapeError
from .tensor import Tensor

SAMPLES_PER_FRAME = 640  # 16000 Hz / 25 fps

__all__ = [
    "SAMPLES_PER_FRAME",
    "hann_window",
    "mel_filterbank",
    "stft_logmel",
    "block_average_repeat",
    "TimeDomainEncoder",
    "FreqDomainEncoder",
    "VisualEncoder",
]


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length n."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def mel_filterbank(n_fft: int, n_mels: int, sample_rate: int = 16000):
    """Triangular mel filters.

    Returns (filters, centers_hz): filters has shape (n_mels,
    n_fft//2 + 1); centers_hz gives each filter's peak frequency for
    diagnostic use.
    """
    def to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def from_mel(m):
        return 700.0 * (np.power(10.0, m / 2595.0) - 1.0)

    n_bins = n_fft // 2 + 1
    mel_points = np.linspace(to_mel(0.0), to_mel(sample_rate / 2.0), n_mels + 2)
    hz_points = from_mel(mel_points)
    bin_freqs = np.arange(n_bins) * sample_rate / n_fft

    filters = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        lo, mid, hi = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        up = (bin_freqs - lo) / (mid - lo)
        down = (hi - bin_freqs) / (hi - mid)
        filters[m] = np.maximum(0.0, np.minimum(up, down))
    return filters, hz_points[1:-1]


def stft_logmel(
    waveform: np.ndarray,
    n_fft: int = 400,
    hop: int = 160,
    n_mels: int = 40,
    sample_rate: int = 16000,
) -> np.ndarray:
    """Log mel spectrogram, shape (n_mels, S) with S frames of hop spacing.

    Power spectrum of Hann-windowed frames through a triangular mel
    bank, then log(x + 1e-6).  Plain ndarray: the spectrogram is input
    data, not part of the differentiable graph.
    """
    wave = np.asarray(waveform, dtype=np.float64)
    if wave.ndim != 1:
        raise InputError(f"waveform must be 1-d, got shape {wave.shape}")
    if wave.size < n_fft:
        raise InputError(f"waveform length {wave.size} shorter than n_fft {n_fft}")
    n_frames = (wave.size - n_fft) // hop + 1
    window = hann_window(n_fft)
    idx = (np.arange(n_frames) * hop)[:, None] + np.arange(n_fft)[None, :]
    frames = wave[idx] * window
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2  # (S, n_bins)
    filters, _ = mel_filterbank(n_fft, n_mels, sample_rate)
    mel = power @ filters.T  # (S, n_mels)
    return np.log(mel + 1e-6).T  # (n_mels, S)


def block_average_repeat(x: Tensor, block: int = 25) -> Tensor:
    """Replace each contiguous block of rows by its mean, repeated.

    Output length equals input length.  A trailing partial block is
    padded by repeating the last row before averaging, then truncated
    back.

    The mean is computed centered on each block's first row
    (r0 + mean(rows - r0)): identical rows then give exactly zero
    deviations, making the op bitwise idempotent, which a plain mean is
    not under round-to-nearest.
    """
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"block_average_repeat expects (S, C), got {x.shape}")
    s, c = x.shape
    pad = (-s) % block
    padded = T.concat([x] + [x[s - 1 : s]] * pad, axis=0) if pad else x
    nb = (s + pad) // block
    blocks = T.reshape(padded, (nb, block, c))
    first = blocks[:, 0]  # (nb, c)
    centered = blocks - T.expand(first, 1, block)
    means = first + T.tmean(centered, axis=1)  # (nb, c)
    out = T.reshape(T.expand(means, 1, block), ((s + pad), c))
    return out[:s] if pad else out


class _ResBlock1d(nn.Module):
    """Residual temporal conv block: x + BN(conv(x)) through ReLU."""

    def __init__(self, rng, channels: int):
        super().__init__()
        self.conv = nn.Conv1d(rng, channels, channels, width=3, stride=1, padding=1, bias=False)
        self.bn = nn.BatchNorm1d(channels)

    def forward(self, x: Tensor) -> Tensor:
        return T.relu(x + self.bn(self.conv(x)))


class TimeDomainEncoder(nn.Module):
    """Raw waveform -> (T0, C1): strided conv stack with a total stride
    of exactly 640, so one output frame per video frame."""

    def __init__(self, rng: np.random.Generator, channels: int = 32):
        super().__init__()
        c = channels
        specs = [
            (1, c // 4, 25, 5, 10),
            (c // 4, c // 2, 9, 4, 4),
            (c // 2, c, 9, 4, 4),
            (c, c, 9, 4, 4),
            (c, c, 4, 2, 1),
        ]
        for i, (cin, cout, w, s, p) in enumerate(specs):
            setattr(self, f"conv{i}", nn.Conv1d(rng, cin, cout, width=w, stride=s, padding=p, bias=False))
            setattr(self, f"bn{i}", nn.BatchNorm1d(cout))
        self.res0 = _ResBlock1d(rng, c)
        self.res1 = _ResBlock1d(rng, c)
        self.n_stages = len(specs)

    def forward(self, waveform) -> Tensor:
        wave = waveform if isinstance(waveform, Tensor) else Tensor(waveform)
        if wave.ndim != 1:
            raise InputError(f"waveform must be 1-d, got shape {wave.shape}")
        if wave.shape[0] % SAMPLES_PER_FRAME:
            raise InputError(
                f"waveform length {wave.shape[0]} is not a multiple of {SAMPLES_PER_FRAME}"
            )
        h = T.reshape(wave, (wave.shape[0], 1))
        for i in range(self.n_stages):
            h = T.relu(getattr(self, f"bn{i}")(getattr(self, f"conv{i}")(h)))
        return self.res1(self.res0(h))


class FreqDomainEncoder(nn.Module):
    """Log-mel (F, S) -> (T1, C1): temporal conv, block average/repeat,
    then nearest-neighbor resample onto the video frame grid."""

    def __init__(self, rng: np.random.Generator, n_mels: int = 40, channels: int = 32, block: int = 25):
        super().__init__()
        self.block = block
        self.conv = nn.Conv1d(rng, n_mels, channels, width=3, stride=1, padding=0, bias=False)
        self.bn = nn.BatchNorm1d(channels)

    def pre_resample(self, logmel) -> Tensor:
        """Everything up to the resampling step; exposed for inspection."""
        lm = logmel if isinstance(logmel, Tensor) else Tensor(logmel)
        if lm.ndim != 2:
            raise ShapeError(f"logmel must be (F, S), got {lm.shape}")
        x = T.transpose(lm)  # (S, F) time-major
        s = x.shape[0]
        # edge-replicate padding keeps constant inputs constant in time
        x = T.concat([x[0:1], x, x[s - 1 : s]], axis=0)
        h = T.relu(self.bn(self.conv(x)))
        return block_average_repeat(h, self.block)

    def forward(self, logmel, t_out: int) -> Tensor:
        h = self.pre_resample(logmel)
        s = h.shape[0]
        if t_out == 1:
            idx = np.zeros(1, dtype=np.int64)
        else:
            idx = np.rint(np.arange(t_out) * (s - 1) / (t_out - 1)).astype(np.int64)
        return h[idx]


class VisualEncoder(nn.Module):
    """Frame stack (T0, H0, W0) in [0,1] -> (T0, C1, H0/8, W0/8).

    Three stride-2 convs; spatial structure kept (no global pooling) so
    downstream region attention can see where things happen.
    """

    def __init__(self, rng: np.random.Generator, channels: int = 32):
        super().__init__()
        c = channels
        self.conv0 = nn.Conv2d(rng, 1, c // 4, size=3, stride=2, padding=1, bias=False)
        self.conv1 = nn.Conv2d(rng, c // 4, c // 2, size=3, stride=2, padding=1, bias=False)
        self.conv2 = nn.Conv2d(rng, c // 2, c, size=3, stride=2, padding=1, bias=False)
        self.bn0 = nn.BatchNorm1d(c // 4)
        self.bn1 = nn.BatchNorm1d(c // 2)
        self.bn2 = nn.BatchNorm1d(c)

    @staticmethod
    def _bn_spatial(bn: nn.BatchNorm1d, x: Tensor) -> Tensor:
        # per-channel stats over all frames and pixels
        n, c, h, w = x.shape
        flat = T.reshape(T.transpose(x, (0, 2, 3, 1)), (n * h * w, c))
        return T.transpose(T.reshape(bn(flat), (n, h, w, c)), (0, 3, 1, 2))

    def forward(self, frames) -> Tensor:
        fr = frames if isinstance(frames, Tensor) else Tensor(frames)
        if fr.ndim != 3:
            raise InputError(f"frames must be (T0, H0, W0), got {fr.shape}")
        t0, h0, w0 = fr.shape
        if h0 < 8 or w0 < 8:
            raise InputError(f"frames {h0}x{w0} too small for three stride-2 layers")
        x = T.reshape(fr, (t0, 1, h0, w0))
        x = T.relu(self._bn_spatial(self.bn0, self.conv0(x)))
        x = T.relu(self._bn_spatial(self.bn1, self.conv1(x)))
        x = T.relu(self._bn_spatial(self.bn2, self.conv2(x)))
        return x
