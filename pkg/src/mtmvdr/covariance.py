"""Mask-weighted spatial and spatio-temporal covariance estimation.

Tap stacking layout: the stacked vector at (t, f) is

    [Y(t, f), Y(t-1, f), ..., Y(t-L+1, f)]      length D = M * L

so entry ``l * M + m`` holds channel ``m`` delayed by ``l`` frames. Frames
before the start of the utterance are zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .masks import MaskTensor
from .signal import ComplexSpectrogram
from .tensor_io import load_tensor, save_tensor

__all__ = [
    "TapStack",
    "CovarianceStack",
    "stack_taps",
    "covariance_real_mask",
    "covariance_complex_mask",
    "save_covariance",
    "load_covariance",
]

DENOM_EPS = 1e-10


@dataclass(frozen=True)
class TapStack:
    bins: np.ndarray  # (T, F, M * L)
    taps: int
    channels: int

    @property
    def frame_count(self) -> int:
        return self.bins.shape[0]

    @property
    def freq_bins(self) -> int:
        return self.bins.shape[1]


@dataclass(frozen=True)
class CovarianceStack:
    matrices: np.ndarray  # (F, D, D)
    taps: int = 1
    channels: int = 1
    role: str = "speech"

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=np.complex128)
        d = self.taps * self.channels
        if m.ndim != 3 or m.shape[1:] != (d, d):
            raise ValueError(f"expected (F, {d}, {d}) matrices, got {m.shape}")
        if self.role not in ("speech", "noise"):
            raise ValueError(f"role must be 'speech' or 'noise', got {self.role!r}")
        object.__setattr__(self, "matrices", m)

    @property
    def dim(self) -> int:
        return self.taps * self.channels

    @property
    def freq_bins(self) -> int:
        return self.matrices.shape[0]

    def hermitian_error(self) -> float:
        return float(np.abs(self.matrices - self.matrices.conj().swapaxes(-1, -2)).max(initial=0.0))

    def min_relative_eigenvalue(self) -> float:
        """Smallest eigenvalue divided by the trace, over all frequencies with nonzero trace."""
        eig = np.linalg.eigvalsh(self.matrices)
        tr = np.trace(self.matrices, axis1=-2, axis2=-1).real
        ok = tr > 0
        if not ok.any():
            return 0.0
        return float((eig[ok, 0] / tr[ok]).min())


def stack_taps(spec: ComplexSpectrogram | np.ndarray, taps: int) -> TapStack:
    if taps < 1:
        raise ValueError(f"taps must be >= 1, got {taps}")
    bins = spec.bins if isinstance(spec, ComplexSpectrogram) else np.asarray(spec)
    T, F, M = bins.shape
    out = np.zeros((T, F, M * taps), dtype=np.complex128)
    for lag in range(taps):
        out[lag:, :, lag * M : (lag + 1) * M] = bins[: T - lag] if lag < T else 0
    return TapStack(out, taps, M)


def _as_stack(x) -> TapStack:
    if isinstance(x, TapStack):
        return x
    if isinstance(x, ComplexSpectrogram):
        return TapStack(x.bins, 1, x.channels)
    raise TypeError(f"expected ComplexSpectrogram or TapStack, got {type(x).__name__}")


def _tap_weights(values: np.ndarray, taps: int, channels: int, shifted: bool) -> np.ndarray:
    """Per-element mask for a stacked vector, shape (T, F, D)."""
    if not shifted:
        return np.repeat(values[:, :, None], taps * channels, axis=2)
    return stack_taps(np.repeat(values[:, :, None], channels, axis=2), taps).bins


def _weighted(stack: TapStack, mask: MaskTensor, shifted: bool, role: str) -> CovarianceStack:
    if mask.shape != stack.bins.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match (T, F) = {stack.bins.shape[:2]}")
    weights = _tap_weights(mask.values, stack.taps, stack.channels, shifted)
    z = weights * stack.bins
    power = np.abs(mask.values) ** 2
    if shifted:
        power = (np.abs(weights[:, :, :: stack.channels]) ** 2).mean(axis=2)
    denom = power.sum(axis=0)
    phi = kernels.outer_sum(z)
    ok = denom >= DENOM_EPS
    phi[ok] /= denom[ok, None, None]
    phi[~ok] = 0.0
    phi = 0.5 * (phi + phi.conj().swapaxes(-1, -2))
    return CovarianceStack(phi, stack.taps, stack.channels, role)


def covariance_real_mask(x, mask: MaskTensor, role: str = "speech", shifted_taps: bool = False) -> CovarianceStack:
    """sum_t RM^2 Y Y^H / sum_t RM^2 per frequency."""
    if mask.is_complex:
        raise ValueError("covariance_real_mask needs a real-valued mask")
    return _weighted(_as_stack(x), mask, shifted_taps, role)


def covariance_complex_mask(x, mask: MaskTensor, role: str = "speech", shifted_taps: bool = False) -> CovarianceStack:
    """sum_t (CM Y)(CM Y)^H / sum_t |CM|^2 per frequency.

    For tap stacks the frame-t mask multiplies every tap block; with
    ``shifted_taps`` tap block l is weighted by the mask of frame t-l instead.
    """
    if not mask.is_complex:
        raise ValueError("covariance_complex_mask needs a complex mask")
    return _weighted(_as_stack(x), mask, shifted_taps, role)


def save_covariance(path, cov: CovarianceStack):
    meta = {"taps": cov.taps, "channels": cov.channels, "role": cov.role}
    return save_tensor(path, cov.matrices, meta=meta)


def load_covariance(path) -> CovarianceStack:
    matrices, meta = load_tensor(path)
    return CovarianceStack(matrices, meta.get("taps", 1), meta.get("channels", matrices.shape[-1]),
                           meta.get("role", "speech"))
