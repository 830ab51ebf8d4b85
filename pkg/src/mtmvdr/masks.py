"""Oracle time-frequency masks computed from known mixture components.

All masks are (T, F) and are shared by every channel. They are computed on a
reference channel (channel 0 unless told otherwise).

Degenerate bins are guarded with a relative threshold: a magnitude below
``EPS_REL * max|.|`` over the utterance counts as zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal import ComplexSpectrogram
from .tensor_io import load_tensor, save_tensor

__all__ = [
    "MASK_KINDS",
    "MaskTensor",
    "relu_mask",
    "sigmoid_mask",
    "complex_mask",
    "complement_noise_mask",
    "save_mask",
    "load_mask",
]

EPS_REL = 1e-8
MASK_KINDS = ("sigmoid", "relu", "complex")


@dataclass(frozen=True)
class MaskTensor:
    values: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in MASK_KINDS:
            raise ValueError(f"unknown mask kind {self.kind!r}")
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ValueError(f"mask must be (T, F), got shape {v.shape}")
        if self.kind == "complex":
            v = v.astype(np.complex128)
        else:
            if np.iscomplexobj(v):
                raise ValueError(f"{self.kind} mask must be real-valued")
            v = v.astype(np.float64)
            if np.any(v < 0):
                raise ValueError(f"{self.kind} mask has negative entries")
            if self.kind == "sigmoid" and np.any(v > 1):
                raise ValueError("sigmoid mask has entries above 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def is_complex(self) -> bool:
        return self.kind == "complex"

    @property
    def shape(self):
        return self.values.shape

    def apply(self, spec: ComplexSpectrogram, channel: int | None = None) -> ComplexSpectrogram:
        """Multiply the mask into one channel (or all channels if ``channel`` is None)."""
        bins = spec.bins if channel is None else spec.bins[:, :, channel : channel + 1]
        if bins.shape[:2] != self.shape:
            raise ValueError(f"mask shape {self.shape} does not match spectrogram {bins.shape[:2]}")
        return spec.replace(bins * self.values[:, :, None])


def _ref_bins(a: ComplexSpectrogram, b: ComplexSpectrogram, ref_channel: int):
    if a.bins.shape != b.bins.shape:
        raise ValueError(f"spectrogram shapes differ: {a.bins.shape} vs {b.bins.shape}")
    if not 0 <= ref_channel < a.channels:
        raise ValueError(f"ref_channel {ref_channel} out of range for {a.channels} channels")
    return a.bins[:, :, ref_channel], b.bins[:, :, ref_channel]


def _floor(*mags: np.ndarray) -> float:
    peak = max(float(m.max(initial=0.0)) for m in mags)
    return EPS_REL * peak


def relu_mask(target: ComplexSpectrogram, mixture: ComplexSpectrogram, ref_channel: int = 0) -> MaskTensor:
    """Unclipped magnitude ratio |S| / |Y|."""
    s, y = _ref_bins(target, mixture, ref_channel)
    mag_s, mag_y = np.abs(s), np.abs(y)
    ok = mag_y >= _floor(mag_y)
    out = np.zeros(mag_y.shape)
    np.divide(mag_s, mag_y, out=out, where=ok & (mag_y > 0))
    return MaskTensor(out, "relu")


def sigmoid_mask(target: ComplexSpectrogram, noise: ComplexSpectrogram, ref_channel: int = 0) -> MaskTensor:
    """Ideal ratio mask |S| / (|S| + |N|), in [0, 1]."""
    s, n = _ref_bins(target, noise, ref_channel)
    mag_s, mag_n = np.abs(s), np.abs(n)
    eps = _floor(mag_s, mag_n)
    denom = mag_s + mag_n
    ok = ((mag_s >= eps) | (mag_n >= eps)) & (denom > 0)
    out = np.zeros(denom.shape)
    np.divide(mag_s, denom, out=out, where=ok)
    return MaskTensor(np.clip(out, 0.0, 1.0), "sigmoid")


def complex_mask(target: ComplexSpectrogram, mixture: ComplexSpectrogram, ref_channel: int = 0) -> MaskTensor:
    """Complex ratio S / Y, uncompressed, so that ``mask * Y == S`` on the reference channel."""
    s, y = _ref_bins(target, mixture, ref_channel)
    mag_y = np.abs(y)
    ok = (mag_y >= _floor(mag_y)) & (mag_y > 0)
    out = np.zeros(y.shape, dtype=np.complex128)
    np.divide(s, y, out=out, where=ok)
    return MaskTensor(out, "complex")


def complement_noise_mask(speech_mask: MaskTensor) -> MaskTensor:
    if speech_mask.is_complex:
        return MaskTensor(1.0 - speech_mask.values, "complex")
    values = np.maximum(1.0 - speech_mask.values, 0.0)
    return MaskTensor(values, speech_mask.kind)


def save_mask(path, mask: MaskTensor):
    return save_tensor(path, mask.values, meta={"kind": mask.kind})


def load_mask(path, shape=None, kind: str | None = None) -> MaskTensor:
    is_complex = None if kind is None else kind == "complex"
    values, meta = load_tensor(path, shape=shape, is_complex=is_complex)
    kind = kind or meta.get("kind") or ("complex" if np.iscomplexobj(values) else "relu")
    return MaskTensor(values, kind)
