"""Reference-channel MVDR and multi-tap MVDR weights.

For every frequency the filter is

    w(f) = inv(Phi_NN(f)) Phi_SS(f) u / trace(inv(Phi_NN(f)) Phi_SS(f))

where ``u`` selects the reference channel in the first tap block. With
``taps == 1`` this is the ordinary spatial MVDR; with ``taps > 1`` the same
expression is evaluated on stacked (M*L)-dimensional covariances.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .covariance import CovarianceStack, stack_taps
from .signal import ComplexSpectrogram
from .tensor_io import save_tensor

__all__ = ["BeamformerWeights", "solve_mvdr", "solve_multitap_mvdr", "apply", "save_weights"]

log = logging.getLogger(__name__)

DEFAULT_LOADING = 1e-6
TRACE_EPS = 1e-10
COND_LIMIT = 1e12


@dataclass(frozen=True)
class BeamformerWeights:
    weights: np.ndarray  # (F, D)
    taps: int
    channels: int
    ref_channel: int = 0
    fallback_bins: tuple = field(default=())

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.complex128)
        if w.ndim != 2 or w.shape[1] != self.taps * self.channels:
            raise ValueError(f"weights must be (F, {self.taps * self.channels}), got {w.shape}")
        if not 0 <= self.ref_channel < self.channels:
            raise ValueError(f"ref_channel {self.ref_channel} out of range")
        object.__setattr__(self, "weights", w)

    @property
    def selector(self) -> np.ndarray:
        u = np.zeros(self.taps * self.channels)
        u[self.ref_channel] = 1.0
        return u

    @classmethod
    def passthrough(cls, freq_bins: int, channels: int, taps: int = 1, ref_channel: int = 0):
        w = np.zeros((freq_bins, channels * taps), dtype=np.complex128)
        w[:, ref_channel] = 1.0
        return cls(w, taps, channels, ref_channel)


def _solve(phi_ss: CovarianceStack, phi_nn: CovarianceStack, ref_channel: int, loading: float) -> BeamformerWeights:
    if phi_ss.matrices.shape != phi_nn.matrices.shape:
        raise ValueError(f"covariance shapes differ: {phi_ss.matrices.shape} vs {phi_nn.matrices.shape}")
    if (phi_ss.taps, phi_ss.channels) != (phi_nn.taps, phi_nn.channels):
        raise ValueError("speech and noise covariances disagree on taps/channels")
    if not 0 <= ref_channel < phi_ss.channels:
        raise ValueError(f"ref_channel {ref_channel} out of range for {phi_ss.channels} channels")
    if loading < 0:
        raise ValueError("diagonal loading must be non-negative")
    ss, nn = phi_ss.matrices, phi_nn.matrices
    if not (np.isfinite(ss).all() and np.isfinite(nn).all()):
        raise ValueError("covariance matrices contain non-finite values")

    F, D, _ = nn.shape
    tr_nn = np.trace(nn, axis1=-2, axis2=-1).real
    nn = nn + (loading * tr_nn / D)[:, None, None] * np.eye(D)

    # Ill-conditioned bins (e.g. silent bands) take the pseudo-inverse route
    cond = np.linalg.cond(nn)
    good = np.isfinite(cond) & (cond < COND_LIMIT)
    ratio = np.empty_like(ss)
    if good.any():
        ratio[good] = np.linalg.solve(nn[good], ss[good])
    if (~good).any():
        ratio[~good] = np.linalg.pinv(nn[~good], hermitian=True) @ ss[~good]

    trace = np.trace(ratio, axis1=-2, axis2=-1)
    w = ratio[:, :, ref_channel].copy()
    fallback = np.abs(trace) < TRACE_EPS
    w[~fallback] /= trace[~fallback, None]
    w[fallback] = 0.0
    w[fallback, ref_channel] = 1.0
    fallback_bins = tuple(int(f) for f in np.flatnonzero(fallback))
    if fallback_bins:
        log.debug("pass-through at %d of %d frequencies", len(fallback_bins), F)
    return BeamformerWeights(w, phi_ss.taps, phi_ss.channels, ref_channel, fallback_bins)


def solve_mvdr(phi_ss: CovarianceStack, phi_nn: CovarianceStack, ref_channel: int = 0,
               loading: float = DEFAULT_LOADING) -> BeamformerWeights:
    if phi_ss.taps != 1 or phi_nn.taps != 1:
        raise ValueError("solve_mvdr expects single-tap covariances; use solve_multitap_mvdr")
    return _solve(phi_ss, phi_nn, ref_channel, loading)


def solve_multitap_mvdr(phi_ss: CovarianceStack, phi_nn: CovarianceStack, ref_channel: int = 0,
                        loading: float = DEFAULT_LOADING) -> BeamformerWeights:
    return _solve(phi_ss, phi_nn, ref_channel, loading)


def apply(weights: BeamformerWeights, mixture: ComplexSpectrogram) -> ComplexSpectrogram:
    """Single-channel output w^H(f) Ybar(t, f)."""
    if mixture.channels != weights.channels:
        raise ValueError(f"weights are for {weights.channels} channels, mixture has {mixture.channels}")
    if mixture.freq_bins != weights.weights.shape[0]:
        raise ValueError("weights and mixture disagree on the number of frequency bins")
    stacked = stack_taps(mixture, weights.taps).bins
    out = np.einsum("fd,tfd->tf", weights.weights.conj(), stacked)
    return mixture.replace(out[:, :, None])


def save_weights(path, weights: BeamformerWeights):
    meta = {"taps": weights.taps, "channels": weights.channels, "ref_channel": weights.ref_channel,
            "fallback_bins": list(weights.fallback_bins)}
    return save_tensor(path, weights.weights, meta=meta)
