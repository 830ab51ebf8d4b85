"""Time-domain signals, STFT configuration and the STFT/iSTFT pair.

Shape conventions used throughout the package:

    TimeSignal.samples:        (M, N)      real, float64
    ComplexSpectrogram.bins:   (T, F, M)   complex128

Frames are centred: frame ``t`` is centred on sample ``t * hop`` of the
original signal, with reflection padding of ``window_len // 2`` samples at the
start and enough reflection padding at the end to cover the last sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.signal
from scipy.io import wavfile

__all__ = [
    "TimeSignal",
    "StftConfig",
    "ComplexSpectrogram",
    "stft",
    "istft",
    "frame_count",
    "read_wav",
    "write_wav",
]


@dataclass(frozen=True)
class TimeSignal:
    """Multichannel waveform, ``samples`` has shape (channels, length)."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2:
            raise ValueError(f"samples must be 1-D or 2-D, got shape {x.shape}")
        if x.shape[0] < 1:
            raise ValueError("a TimeSignal needs at least one channel")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    def __len__(self) -> int:
        return self.samples.shape[1]

    def channel(self, index: int) -> "TimeSignal":
        return TimeSignal(self.samples[index], self.sample_rate)


@dataclass(frozen=True)
class StftConfig:
    """STFT parameters. Defaults: 512-point FFT, 32 ms Hann window, 50 % overlap at 16 kHz."""

    fft_size: int = 512
    window_len: int = 512
    hop: int = 256
    window: str = "hann"

    def __post_init__(self):
        if self.window_len > self.fft_size:
            raise ValueError(f"window_len ({self.window_len}) exceeds fft_size ({self.fft_size})")
        if self.hop <= 0 or self.window_len <= 0:
            raise ValueError("hop and window_len must be positive")
        if self.window_len % self.hop:
            raise ValueError(f"hop ({self.hop}) must divide window_len ({self.window_len})")

    @property
    def freq_bins(self) -> int:
        return self.fft_size // 2 + 1

    def analysis_window(self) -> np.ndarray:
        return scipy.signal.get_window(self.window, self.window_len, fftbins=True).astype(np.float64)

    def bin_frequencies(self, sample_rate: float) -> np.ndarray:
        """Centre frequency in Hz of every stored bin, ``k * fs / fft_size``."""
        return np.arange(self.freq_bins) * sample_rate / self.fft_size


@dataclass(frozen=True)
class ComplexSpectrogram:
    """STFT tensor of shape (T, F, M) together with what is needed to invert it."""

    bins: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)
    sample_rate: int = 16000
    length: int | None = None

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=np.complex128)
        if b.ndim == 2:
            b = b[:, :, None]
        if b.ndim != 3:
            raise ValueError(f"bins must have shape (T, F, M), got {b.shape}")
        if b.shape[1] != self.config.freq_bins:
            raise ValueError(f"expected {self.config.freq_bins} frequency bins, got {b.shape[1]}")
        b.setflags(write=False)
        object.__setattr__(self, "bins", b)

    @property
    def frame_count(self) -> int:
        return self.bins.shape[0]

    @property
    def freq_bins(self) -> int:
        return self.bins.shape[1]

    @property
    def channels(self) -> int:
        return self.bins.shape[2]

    def channel(self, index: int) -> "ComplexSpectrogram":
        return self.replace(self.bins[:, :, index : index + 1])

    def replace(self, bins: np.ndarray) -> "ComplexSpectrogram":
        return ComplexSpectrogram(bins, self.config, self.sample_rate, self.length)


def frame_count(length: int, config: StftConfig) -> int:
    """Number of centred frames for a signal of ``length`` samples: ``1 + ceil(length / hop)``."""
    return 1 + math.ceil(length / config.hop)


def _pad(x: np.ndarray, left: int, right: int) -> np.ndarray:
    if x.shape[-1] > 1:
        return np.pad(x, [(0, 0), (left, right)], mode="reflect")
    return np.pad(x, [(0, 0), (left, right)])


def stft(signal: TimeSignal, config: StftConfig = StftConfig()) -> ComplexSpectrogram:
    n = len(signal)
    if n == 0:
        raise ValueError("cannot take the STFT of an empty signal")
    win = config.analysis_window()
    half = config.window_len // 2
    frames = frame_count(n, config)
    padded_len = (frames - 1) * config.hop + config.window_len
    x = _pad(signal.samples, half, padded_len - n - half)

    # (M, T, window_len) view, no copy
    strided = np.lib.stride_tricks.sliding_window_view(x, config.window_len, axis=-1)[:, :: config.hop]
    spec = np.fft.rfft(strided * win, n=config.fft_size, axis=-1)
    return ComplexSpectrogram(np.transpose(spec, (1, 2, 0)), config, signal.sample_rate, n)


def istft(spec: ComplexSpectrogram, length: int | None = None) -> TimeSignal:
    """Overlap-add synthesis with squared-window normalisation."""
    config = spec.config
    length = spec.length if length is None else length
    frames = spec.frame_count
    if length is None:
        length = (frames - 1) * config.hop
    win = config.analysis_window()
    half = config.window_len // 2

    # (M, T, fft_size) -> keep the window_len samples the analysis used
    chunks = np.fft.irfft(np.transpose(spec.bins, (2, 0, 1)), n=config.fft_size, axis=-1)
    chunks = chunks[..., : config.window_len] * win

    padded_len = (frames - 1) * config.hop + config.window_len
    out = np.zeros((spec.channels, padded_len))
    norm = np.zeros(padded_len)
    for t in range(frames):
        start = t * config.hop
        out[:, start : start + config.window_len] += chunks[:, t]
        norm[start : start + config.window_len] += win**2

    stop = half + length
    if stop > padded_len:
        raise ValueError(f"spectrogram with {frames} frames cannot produce {length} samples")
    norm = norm[half:stop]
    if np.any(norm < 1e-10):
        raise ValueError("window/hop combination is not overlap-add invertible (zero normalisation)")
    return TimeSignal(out[:, half:stop] / norm, spec.sample_rate)


def read_wav(path: str | Path) -> TimeSignal:
    """Read PCM16 / PCM32 / float WAV into float64 samples in [-1, 1]."""
    rate, data = wavfile.read(str(path))
    if data.dtype == np.int16:
        data = data / 32768.0
    elif data.dtype == np.int32:
        data = data / 2147483648.0
    elif data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0
    data = np.asarray(data, dtype=np.float64)
    return TimeSignal(data.T if data.ndim == 2 else data, rate)


def write_wav(path: str | Path, signal: TimeSignal, subtype: str = "float32") -> None:
    """Write a WAV file; ``subtype`` is ``"float32"`` or ``"pcm16"``."""
    x = signal.samples.T
    if subtype == "float32":
        data = x.astype(np.float32)
    elif subtype == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise ValueError(f"unsupported WAV subtype {subtype!r}")
    if data.shape[1] == 1:
        data = data[:, 0]
    wavfile.write(str(path), int(signal.sample_rate), data)
