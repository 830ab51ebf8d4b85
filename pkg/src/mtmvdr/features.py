"""Array geometry, far-field steering vectors, IPDs and the directional feature.

Angle convention: the array axis is x. A plane wave at angle ``theta`` (degrees)
propagates along ``k = (cos theta, sin theta, 0)``, so microphone ``m`` hears
it ``(p_m - p_ref) . k / c`` seconds after the reference microphone. For a
linear array this reduces to ``(x_m - x_ref) cos(theta) / c``. The source
itself therefore sits on the ``-k`` side of the array (see
:func:`source_position`).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .signal import ComplexSpectrogram, StftConfig

__all__ = [
    "DEFAULT_SPACINGS_CM",
    "ArrayGeometry",
    "SteeringVector",
    "default_geometry",
    "steering_vector",
    "source_position",
    "ipd",
    "directional_feature",
]

SOUND_SPEED = 343.0
DEFAULT_SPACINGS_CM = (8, 6, 6, 4, 4, 2, 2, 2, 2, 4, 4, 6, 6, 8)


@dataclass(frozen=True)
class ArrayGeometry:
    """Microphone positions in metres, (M,) for a linear array along x or (M, 3)."""

    mic_positions: np.ndarray
    sound_speed: float = SOUND_SPEED

    def __post_init__(self):
        p = np.asarray(self.mic_positions, dtype=np.float64)
        if p.ndim == 1:
            p = np.stack([p, np.zeros_like(p), np.zeros_like(p)], axis=1)
        if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] < 1:
            raise ValueError(f"mic_positions must be (M,) or (M, 3), got {np.shape(self.mic_positions)}")
        if not np.isfinite(p).all():
            raise ValueError("mic positions must be finite")
        if p.shape[0] > 1:
            gaps = np.linalg.norm(p[:, None] - p[None], axis=-1) + np.eye(p.shape[0])
            if gaps.min() <= 1e-9:
                raise ValueError("two microphones are coincident")
        object.__setattr__(self, "mic_positions", p)

    @property
    def channels(self) -> int:
        return self.mic_positions.shape[0]

    @property
    def is_linear(self) -> bool:
        return bool(np.allclose(self.mic_positions[:, 1:], self.mic_positions[:1, 1:]))

    def translated(self, center) -> "ArrayGeometry":
        """Same array with its centroid moved to ``center`` (3-D, metres)."""
        p = self.mic_positions - self.mic_positions.mean(axis=0) + np.asarray(center, dtype=np.float64)
        return ArrayGeometry(p, self.sound_speed)


@dataclass(frozen=True)
class SteeringVector:
    values: np.ndarray  # (F, M), unit modulus
    doa: float


def default_geometry(spacings_cm=DEFAULT_SPACINGS_CM) -> ArrayGeometry:
    """15-element non-uniform symmetric linear array, centred on the origin."""
    x = np.concatenate([[0.0], np.cumsum(spacings_cm) / 100.0])
    return ArrayGeometry(x - x.mean())


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not np.isfinite(theta) or not -360.0 <= theta <= 360.0:
        raise ValueError(f"invalid direction {theta}")
    return theta


def _direction(theta: float) -> np.ndarray:
    rad = np.deg2rad(theta)
    return np.array([np.cos(rad), np.sin(rad), 0.0])


def source_position(center, theta: float, distance: float) -> np.ndarray:
    """Point ``distance`` metres from ``center`` whose plane wave arrives at angle ``theta``."""
    return np.asarray(center, dtype=np.float64) - distance * _direction(_check_theta(theta))


def relative_delays(geom: ArrayGeometry, theta: float, ref_channel: int = 0) -> np.ndarray:
    """Arrival delay of every microphone relative to the reference, seconds."""
    rel = geom.mic_positions - geom.mic_positions[ref_channel]
    return rel @ _direction(_check_theta(theta)) / geom.sound_speed


def steering_vector(geom: ArrayGeometry, theta: float, config: StftConfig = StftConfig(),
                    ref_channel: int = 0, sample_rate: int = 16000) -> SteeringVector:
    if not 0 <= ref_channel < geom.channels:
        raise ValueError(f"ref_channel {ref_channel} out of range")
    tau = relative_delays(geom, theta, ref_channel)
    freqs = config.bin_frequencies(sample_rate)
    values = np.exp(-2j * np.pi * freqs[:, None] * tau[None, :])
    values[:, ref_channel] = 1.0
    return SteeringVector(values, float(theta))


def _wrap(phase: np.ndarray) -> np.ndarray:
    """Wrap to (-pi, pi]."""
    out = np.mod(phase + np.pi, 2 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out)


def ipd(spec: ComplexSpectrogram, pair) -> np.ndarray:
    """Phase of Y_i conj(Y_j), (T, F), wrapped to (-pi, pi]."""
    i, j = pair
    if i == j or not (0 <= i < spec.channels and 0 <= j < spec.channels):
        raise ValueError(f"invalid channel pair {pair} for {spec.channels} channels")
    return _wrap(np.angle(spec.bins[:, :, i] * np.conj(spec.bins[:, :, j])))


def directional_feature(spec: ComplexSpectrogram, geom: ArrayGeometry, theta: float,
                        pairs=None, ref_channel: int = 0) -> np.ndarray:
    """Mean over pairs of cos(IPD - expected phase difference for ``theta``), (T, F) in [-1, 1]."""
    if pairs is None:
        pairs = [(ref_channel, m) for m in range(spec.channels) if m != ref_channel]
    pairs = list(pairs)
    if not pairs:
        raise ValueError("directional_feature needs at least one microphone pair")
    if geom.channels != spec.channels:
        raise ValueError("geometry and spectrogram disagree on channel count")
    sv = steering_vector(geom, theta, spec.config, ref_channel, spec.sample_rate).values
    total = np.zeros(spec.bins.shape[:2])
    for i, j in pairs:
        expected = np.angle(sv[:, i] * np.conj(sv[:, j]))
        total += np.cos(ipd(spec, (i, j)) - expected[None, :])
    return np.clip(total / len(pairs), -1.0, 1.0)


def all_pairs(channels: int):
    return list(itertools.combinations(range(channels), 2))
