"""End-to-end enhancement with oracle (or externally supplied) masks."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .beamformer import DEFAULT_LOADING, BeamformerWeights, solve_multitap_mvdr
from .covariance import TapStack, covariance_complex_mask, covariance_real_mask, stack_taps
from .masks import MaskTensor, complement_noise_mask, complex_mask, relu_mask, sigmoid_mask
from .signal import ComplexSpectrogram, StftConfig, TimeSignal, istft, stft

__all__ = ["SystemSpec", "SYSTEMS", "EnhanceResult", "oracle_masks", "enhance", "enhance_scene"]

MASKS = ("sigmoid", "relu", "cm")
NOISE_POLICIES = ("oracle", "complement")


@dataclass(frozen=True)
class SystemSpec:
    mask: str = "cm"
    noise_mask: str = "oracle"
    taps: int = 3
    loading: float = DEFAULT_LOADING
    ref_channel: int = 0
    chunk_seconds: float | None = None
    beamformer: bool = True
    shifted_taps: bool = False

    def __post_init__(self):
        if self.mask not in MASKS:
            raise ValueError(f"mask must be one of {MASKS}, got {self.mask!r}")
        if self.noise_mask not in NOISE_POLICIES:
            raise ValueError(f"noise_mask must be one of {NOISE_POLICIES}, got {self.noise_mask!r}")
        if self.taps < 1:
            raise ValueError("taps must be >= 1")
        if self.loading < 0:
            raise ValueError("loading must be >= 0")
        if self.chunk_seconds is not None and self.chunk_seconds <= 0:
            raise ValueError("chunk_seconds must be positive")


# The compared systems expressed as flag combinations; "mixture" is the unprocessed reference channel.
SYSTEMS = {
    "relu-mask": SystemSpec(mask="relu", taps=1, beamformer=False),
    "cm-mask": SystemSpec(mask="cm", taps=1, beamformer=False),
    "sigmoid-mvdr": SystemSpec(mask="sigmoid", taps=1),
    "relu-mvdr": SystemSpec(mask="relu", taps=1),
    "cm-mvdr": SystemSpec(mask="cm", taps=1),
    "cm-mtmvdr": SystemSpec(mask="cm", taps=3),
}


@dataclass
class EnhanceResult:
    output: TimeSignal
    speech_mask: MaskTensor
    noise_mask: MaskTensor | None
    weights: list = field(default_factory=list)  # one BeamformerWeights per chunk
    chunks: list = field(default_factory=list)  # (start_frame, stop_frame)


def oracle_masks(Y: ComplexSpectrogram, S: ComplexSpectrogram, N: ComplexSpectrogram, kind: str,
                 noise_policy: str = "oracle", ref_channel: int = 0):
    if kind == "cm":
        speech = complex_mask(S, Y, ref_channel)
        noise = complex_mask(N, Y, ref_channel) if noise_policy == "oracle" else None
    elif kind == "relu":
        speech = relu_mask(S, Y, ref_channel)
        noise = relu_mask(N, Y, ref_channel) if noise_policy == "oracle" else None
    elif kind == "sigmoid":
        speech = sigmoid_mask(S, N, ref_channel)
        noise = sigmoid_mask(N, S, ref_channel) if noise_policy == "oracle" else None
    else:
        raise ValueError(f"unknown mask kind {kind!r}")
    if noise is None:
        noise = complement_noise_mask(speech)
    return speech, noise


def _chunk_bounds(frames: int, chunk_frames: int | None):
    if chunk_frames is None or chunk_frames >= frames:
        return [(0, frames)]
    return [(a, min(frames, a + chunk_frames)) for a in range(0, frames, chunk_frames)]


def _covariance(stack: TapStack, mask: MaskTensor, role: str, shifted: bool):
    if mask.is_complex:
        return covariance_complex_mask(stack, mask, role, shifted)
    return covariance_real_mask(stack, mask, role, shifted)


def enhance(mixture: TimeSignal, system: SystemSpec, *, target: TimeSignal | None = None,
            noise: TimeSignal | None = None, speech_mask: MaskTensor | None = None,
            noise_mask: MaskTensor | None = None, config: StftConfig = StftConfig()) -> EnhanceResult:
    """Enhance ``mixture`` with oracle masks (from ``target``) or with supplied masks.

    When only ``target`` is given the noise component is ``mixture - target``.
    """
    ref = system.ref_channel
    if not 0 <= ref < mixture.channels:
        raise ValueError(f"ref_channel {ref} out of range for {mixture.channels} channels")
    Y = stft(mixture, config)
    if speech_mask is None:
        if target is None:
            raise ValueError("oracle masks need the target component")
        if noise is None:
            noise = TimeSignal(mixture.samples - target.samples, mixture.sample_rate)
        speech_mask, oracle_noise = oracle_masks(Y, stft(target, config), stft(noise, config),
                                                 system.mask, system.noise_mask, ref)
        noise_mask = noise_mask or oracle_noise
    elif noise_mask is None:
        noise_mask = complement_noise_mask(speech_mask)
    if speech_mask.shape != Y.bins.shape[:2]:
        raise ValueError(f"mask shape {speech_mask.shape} does not match STFT (T, F) = {Y.bins.shape[:2]}")

    if not system.beamformer:
        masked = speech_mask.apply(Y, channel=ref)
        return EnhanceResult(istft(masked), speech_mask, noise_mask)

    stack = stack_taps(Y, system.taps)
    chunk_frames = None
    if system.chunk_seconds is not None:
        chunk_frames = max(1, int(round(system.chunk_seconds * mixture.sample_rate / config.hop)))
    bounds = _chunk_bounds(Y.frame_count, chunk_frames)
    out = np.zeros(Y.bins.shape[:2], dtype=np.complex128)
    weights = []
    for a, b in bounds:
        part = TapStack(stack.bins[a:b], stack.taps, stack.channels)
        phi_ss = _covariance(part, MaskTensor(speech_mask.values[a:b], speech_mask.kind), "speech",
                             system.shifted_taps)
        phi_nn = _covariance(part, MaskTensor(noise_mask.values[a:b], noise_mask.kind), "noise",
                             system.shifted_taps)
        w = solve_multitap_mvdr(phi_ss, phi_nn, ref, system.loading)
        out[a:b] = np.einsum("fd,tfd->tf", w.weights.conj(), part.bins)
        weights.append(w)
    enhanced = istft(Y.replace(out[:, :, None]))
    return EnhanceResult(enhanced, speech_mask, noise_mask, weights, bounds)


def passthrough_weights(Y: ComplexSpectrogram, taps: int = 1, ref_channel: int = 0) -> BeamformerWeights:
    return BeamformerWeights.passthrough(Y.freq_bins, Y.channels, taps, ref_channel)


def enhance_scene(scene, system: SystemSpec | str, config: StftConfig = StftConfig()) -> TimeSignal:
    """Single-channel output of ``system`` on a simulated scene; ``"mixture"`` passes the reference through."""
    if isinstance(system, str):
        if system == "mixture":
            return scene.mixture.channel(scene.config.ref_channel)
        system = SYSTEMS[system]
    if system.ref_channel != scene.config.ref_channel:
        system = replace(system, ref_channel=scene.config.ref_channel)
    return enhance(scene.mixture, system, target=scene.target_reverberant, config=config).output
