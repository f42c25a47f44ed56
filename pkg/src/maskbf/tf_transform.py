"""Multichannel STFT analysis and weighted overlap-add synthesis.

Shapes follow the ``(channel, frequency, frame)`` convention for spectrograms
and ``(channel, sample)`` for time signals.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import get_window

from .errors import InvalidConfig, InvalidInput

WINDOW_KINDS = ("hann", "hamming", "boxcar")


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 1024
    hop_len: int = 256
    window_kind: str = "hann"

    def __post_init__(self):
        if self.window_kind not in WINDOW_KINDS:
            raise InvalidConfig(f"unknown window kind {self.window_kind!r}")
        if int(self.window_len) != self.window_len or int(self.hop_len) != self.hop_len:
            raise InvalidConfig("window_len and hop_len must be integers")
        if self.window_len <= 0 or self.window_len % 2:
            raise InvalidConfig("window_len must be a positive even number")
        if not 0 < self.hop_len <= self.window_len:
            raise InvalidConfig("hop_len must satisfy 0 < hop_len <= window_len")
        if not is_cola(self.window(), self.hop_len):
            raise InvalidConfig(
                f"{self.window_kind} window of length {self.window_len} is not "
                f"constant-overlap-add at hop {self.hop_len}"
            )

    @property
    def n_bins(self):
        return self.window_len // 2 + 1

    def window(self):
        """Periodic analysis window."""
        return get_window(self.window_kind, self.window_len, fftbins=True)

    def synthesis_window(self):
        """Canonical dual window for weighted overlap-add."""
        w = self.window()
        return w / _overlap_sum(w ** 2, self.hop_len)


def _overlap_sum(values, hop):
    """Periodic sum ``sum_j values[n + j * hop]`` folded back onto ``[0, len)``."""
    n = len(values)
    out = np.zeros(n)
    for start in range(-(n // hop) * hop, n, hop):
        lo, hi = max(start, 0), min(start + n, n)
        if lo < hi:
            out[lo:hi] += values[lo - start:hi - start]
    return out


def is_cola(window, hop, rtol=1e-10):
    total = _overlap_sum(np.asarray(window, dtype=float), hop)
    return total.min() > 0 and np.ptp(total) <= rtol * total.max()


@dataclass
class TimeSignal:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[None, :]
        if samples.ndim != 2:
            raise InvalidInput("samples must have shape (channels, length)")
        if self.sample_rate <= 0 or int(self.sample_rate) != self.sample_rate:
            raise InvalidInput("sample_rate must be a positive integer")
        self.samples = samples
        self.sample_rate = int(self.sample_rate)

    @property
    def channels(self):
        return self.samples.shape[0]

    def __len__(self):
        return self.samples.shape[1]


@dataclass
class Spectrogram:
    """Complex one-sided STFT with shape (channels, bins, frames)."""

    bins: np.ndarray
    config: StftConfig
    sample_rate: int
    length: int = field(default=0)

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.complex128)
        if self.bins.ndim != 3:
            raise InvalidInput("bins must have shape (channels, frequencies, frames)")
        if self.bins.shape[1] != self.config.n_bins:
            raise InvalidInput(
                f"expected {self.config.n_bins} frequency bins, got {self.bins.shape[1]}"
            )

    @property
    def channels(self):
        return self.bins.shape[0]

    @property
    def n_frames(self):
        return self.bins.shape[2]

    @property
    def n_bins(self):
        return self.bins.shape[1]

    def channel(self, k):
        """Single-channel view ``(bins, frames)``."""
        return self.bins[k]

    def ftn(self):
        """Bins reordered to ``(frequency, frame, channel)`` for per-bin linear algebra."""
        return np.ascontiguousarray(np.transpose(self.bins, (1, 2, 0)))


def n_frames_for(length, config):
    padded = length + 2 * config.window_len
    return (padded - config.window_len) // config.hop_len + 1


def stft(signal, config=None):
    """Analyze every channel of ``signal`` with zero padding of one window at both ends."""
    config = config or StftConfig()
    x = signal.samples
    if x.shape[1] == 0:
        raise InvalidInput("cannot transform an empty signal")
    wl, hop = config.window_len, config.hop_len
    padded = np.pad(x, ((0, 0), (wl, wl)))
    n_frames = n_frames_for(x.shape[1], config)
    frames = np.lib.stride_tricks.sliding_window_view(padded, wl, axis=-1)[:, ::hop][:, :n_frames]
    spec = np.fft.rfft(frames * config.window(), axis=-1)
    return Spectrogram(np.swapaxes(spec, 1, 2), config, signal.sample_rate, x.shape[1])


def istft(spec, config=None, length=None):
    """Invert :func:`stft` by weighted overlap-add with the dual synthesis window."""
    if config is not None and config != spec.config:
        raise InvalidConfig(f"spectrogram was produced with {spec.config}, not {config}")
    config = spec.config
    wl, hop = config.window_len, config.hop_len
    length = spec.length if length is None else length
    n_ch, _, n_frames = spec.bins.shape
    frames = np.fft.irfft(np.swapaxes(spec.bins, 1, 2), n=wl, axis=-1)
    frames *= config.synthesis_window()
    total = (n_frames - 1) * hop + wl
    out = np.zeros((n_ch, total))
    for t in range(n_frames):
        out[:, t * hop:t * hop + wl] += frames[:, t]
    out = out[:, wl:wl + length]
    if out.shape[1] < length:
        out = np.pad(out, ((0, 0), (0, length - out.shape[1])))
    return TimeSignal(out, spec.sample_rate)


def single_channel(bins, like):
    """Wrap a ``(bins, frames)`` array as a one-channel spectrogram shaped like ``like``."""
    return Spectrogram(np.asarray(bins)[None], like.config, like.sample_rate, like.length)
