"""Image-source room simulation and mixture construction.

A shoebox room ``[0, Lx] x [0, Ly] x [0, Lz]`` with per-wall absorption
``alpha`` (reflection amplitude ``sqrt(1 - alpha)``) is simulated by summing
mirror images up to a maximum reflection order. Each image contributes a
fractionally delayed, Hann-windowed sinc pulse of amplitude
``prod(beta ** hits) / (4 pi d)``.

Wall order everywhere is ``(x=0, x=Lx, y=0, y=Ly, z=0, z=Lz)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.signal

from . import kernels
from .features import SOUND_SPEED, default_geometry, source_position
from .signal import TimeSignal, read_wav, write_wav

__all__ = [
    "ANGLE_BUCKETS",
    "SceneConfig",
    "SimulatedScene",
    "TestsetPolicy",
    "image_sources",
    "simulate_rir",
    "rir_bank",
    "speech_shaped_source",
    "dry_sources_for",
    "render_scene",
    "generate_testset",
    "write_scene",
    "read_scene",
]

SINC_HALF_WIDTH = 40  # 81-tap kernel
ANGLE_BUCKETS = {
    "0-15": (0.0, 15.0),
    "15-45": (15.0, 45.0),
    "45-90": (45.0, 90.0),
    "90-180": (90.0, 180.0),
}


@dataclass
class SceneConfig:
    room_dims: list
    source_positions: list
    mic_positions: list
    reflection_order: int = 6
    absorption: list = field(default_factory=lambda: [0.4] * 6)
    sample_rate: int = 16000
    sir_db: float = 0.0
    snr_db: float = 24.0
    seed: int = 0
    ref_channel: int = 0
    duration: float = 4.0
    sound_speed: float = SOUND_SPEED
    noise_position: list | None = None
    scene_id: str = "0000"
    source_doas: list = field(default_factory=list)
    angle_bucket: str | None = None

    def __post_init__(self):
        self.room_dims = [float(v) for v in self.room_dims]
        self.source_positions = [[float(c) for c in p] for p in self.source_positions]
        self.mic_positions = [[float(c) for c in p] for p in self.mic_positions]
        if isinstance(self.absorption, (int, float)):
            self.absorption = [float(self.absorption)] * 6
        self.absorption = [float(a) for a in self.absorption]
        self.validate()

    def validate(self):
        if len(self.room_dims) != 3 or min(self.room_dims) <= 0:
            raise ValueError(f"room_dims must be three positive lengths, got {self.room_dims}")
        if not self.source_positions:
            raise ValueError("a scene needs at least one source")
        if not self.mic_positions:
            raise ValueError("a scene needs at least one microphone")
        if self.reflection_order < 0:
            raise ValueError("reflection_order must be >= 0")
        if len(self.absorption) != 6 or not all(0 < a <= 1 for a in self.absorption):
            raise ValueError(f"absorption must be six values in (0, 1], got {self.absorption}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not 0 <= self.ref_channel < len(self.mic_positions):
            raise ValueError("ref_channel out of range")
        points = list(self.source_positions) + list(self.mic_positions)
        if self.noise_position is not None:
            points.append(self.noise_position)
        room = np.asarray(self.room_dims)
        for p in points:
            p = np.asarray(p, dtype=np.float64)
            if p.shape != (3,) or np.any(p <= 0) or np.any(p >= room):
                raise ValueError(f"position {p.tolist()} is not strictly inside room {self.room_dims}")

    @property
    def speakers(self) -> int:
        return len(self.source_positions)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SceneConfig":
        return cls(**data)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "SceneConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SimulatedScene:
    mixture: TimeSignal
    target_reverberant: TimeSignal
    interferences_reverberant: list
    noise: TimeSignal
    config: SceneConfig

    @property
    def interference(self) -> np.ndarray:
        if not self.interferences_reverberant:
            return np.zeros_like(self.target_reverberant.samples)
        return np.sum([s.samples for s in self.interferences_reverberant], axis=0)

    def achieved_ratios(self) -> dict:
        ref = self.config.ref_channel
        p_t = _power(self.target_reverberant.samples[ref])
        out = {"snr_db": 10 * math.log10(p_t / _power(self.noise.samples[ref]))}
        if self.interferences_reverberant:
            out["sir_db"] = 10 * math.log10(p_t / _power(self.interference[ref]))
        return out


def _power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x)))


def _axis_images(src: float, length: float, order: int):
    """Image coordinates along one axis with their (near wall, far wall) hit counts."""
    idx = np.arange(-order, order + 1)
    pos = np.where(idx % 2 == 0, idx * length + src, (idx + 1) * length - src)
    a = np.abs(idx)
    far = np.where(idx > 0, (a + 1) // 2, a // 2)
    near = a - far
    return idx, pos, near, far


def image_sources(config: SceneConfig, source) -> tuple[np.ndarray, np.ndarray]:
    """Image positions (K, 3) and reflection amplitude products (K,) up to the configured order."""
    order = config.reflection_order
    beta = np.sqrt(1.0 - np.asarray(config.absorption))
    axes = [_axis_images(source[d], config.room_dims[d], order) for d in range(3)]
    (ix, px, nx, fx), (iy, py, ny, fy), (iz, pz, nz, fz) = axes
    I, J, K = np.meshgrid(np.arange(ix.size), np.arange(iy.size), np.arange(iz.size), indexing="ij")
    keep = (np.abs(ix[I]) + np.abs(iy[J]) + np.abs(iz[K])) <= order
    I, J, K = I[keep], J[keep], K[keep]
    positions = np.stack([px[I], py[J], pz[K]], axis=1)
    refl = (beta[0] ** nx[I] * beta[1] ** fx[I] * beta[2] ** ny[J] * beta[3] ** fy[J]
            * beta[4] ** nz[K] * beta[5] ** fz[K])
    return positions, refl


def _rir_length(config: SceneConfig, images: np.ndarray, mics: np.ndarray) -> int:
    far = np.linalg.norm(images[None, :, :] - mics[:, None, :], axis=-1).max()
    return int(math.ceil(far / config.sound_speed * config.sample_rate)) + SINC_HALF_WIDTH + 2


def rir_bank(config: SceneConfig, source, length: int | None = None) -> np.ndarray:
    """Impulse responses from ``source`` to every microphone, shape (M, N)."""
    source = np.asarray(source, dtype=np.float64)
    mics = np.asarray(config.mic_positions)
    images, refl = image_sources(config, source)
    if length is None:
        length = _rir_length(config, images, mics)
    out = np.zeros((mics.shape[0], length))
    for m, mic in enumerate(mics):
        dist = np.linalg.norm(images - mic, axis=1)
        dist = np.maximum(dist, 1e-3)
        delays = dist / config.sound_speed * config.sample_rate
        gains = refl / (4.0 * np.pi * dist)
        kernels.add_pulses(out[m], delays, gains, SINC_HALF_WIDTH)
    return out


def simulate_rir(config: SceneConfig, source_index: int = 0, mic_index: int = 0) -> TimeSignal:
    if not 0 <= source_index < len(config.source_positions):
        raise ValueError(f"source_index {source_index} out of range")
    if not 0 <= mic_index < len(config.mic_positions):
        raise ValueError(f"mic_index {mic_index} out of range")
    config.validate()
    single = SceneConfig(**{**config.to_dict(), "mic_positions": [config.mic_positions[mic_index]], "ref_channel": 0})
    h = rir_bank(single, config.source_positions[source_index])
    return TimeSignal(h[0], config.sample_rate)


def speech_shaped_source(rng: np.random.Generator, duration: float, sample_rate: int = 16000) -> np.ndarray:
    """Bursty, formant-filtered excitation that is sparse in time-frequency like speech.

    Voiced bursts use a glottal pulse train, unvoiced bursts use white noise;
    both pass through three random formant resonators and a spectral tilt.
    """
    n = int(round(duration * sample_rate))
    out = np.zeros(n)
    pos = int(rng.uniform(0.0, 0.15) * sample_rate)
    while pos < n:
        burst = int(rng.uniform(0.08, 0.35) * sample_rate)
        stop = min(n, pos + burst)
        seg = stop - pos
        if rng.random() < 0.8:
            f0 = rng.uniform(90.0, 240.0) * (1.0 + 0.1 * np.sin(np.linspace(0, np.pi, seg)))
            phase = np.cumsum(f0 / sample_rate)
            excitation = np.diff(np.floor(phase), prepend=0.0) * 4.0
            excitation += 0.05 * rng.standard_normal(seg)
        else:
            excitation = 0.5 * rng.standard_normal(seg)
        shaped = excitation
        for lo, hi in ((300.0, 900.0), (900.0, 2400.0), (2400.0, 3600.0)):
            fc = rng.uniform(lo, hi)
            r = np.exp(-np.pi * rng.uniform(60.0, 160.0) / sample_rate)
            a = [1.0, -2 * r * np.cos(2 * np.pi * fc / sample_rate), r * r]
            shaped = shaped + 0.6 * scipy.signal.lfilter([1.0 - r], a, excitation)
        shaped = scipy.signal.lfilter([1.0], [1.0, -0.9], shaped)
        out[pos:stop] += shaped * np.hanning(seg) * rng.uniform(0.5, 1.0)
        pos = stop + int(rng.uniform(0.03, 0.25) * sample_rate)
    rms = np.sqrt(np.mean(out**2))
    return out * (0.1 / rms) if rms > 0 else out


def dry_sources_for(config: SceneConfig) -> list:
    rng = np.random.default_rng([config.seed, 1])
    return [TimeSignal(speech_shaped_source(rng, config.duration, config.sample_rate), config.sample_rate)
            for _ in config.source_positions]


def _reverberate(config: SceneConfig, source, dry: np.ndarray) -> np.ndarray:
    h = rir_bank(config, source)
    return scipy.signal.fftconvolve(h, dry[None, :], axes=-1)[:, : dry.size]


def render_scene(config: SceneConfig, dry_sources=None, noise_source: TimeSignal | None = None) -> SimulatedScene:
    """Convolve dry sources with their RIRs and mix at the configured SIR and SNR.

    Both ratios are measured on the reference channel against the reverberant
    target. Interferers are first equalised to the target power, then scaled
    jointly so that their sum meets ``sir_db`` exactly.
    """
    if dry_sources is None:
        dry_sources = dry_sources_for(config)
    if not dry_sources:
        raise ValueError("render_scene needs at least one dry source")
    if len(dry_sources) != len(config.source_positions):
        raise ValueError(f"{len(dry_sources)} dry sources for {len(config.source_positions)} positions")
    fs = config.sample_rate
    dry = [np.asarray(s.samples[0] if isinstance(s, TimeSignal) else s, dtype=np.float64) for s in dry_sources]
    n = dry[0].size
    if any(d.size != n for d in dry):
        raise ValueError("dry sources must have equal length")
    ref = config.ref_channel

    target = _reverberate(config, config.source_positions[0], dry[0])
    p_t = _power(target[ref])
    if p_t <= 0:
        raise ValueError("target is silent at the reference microphone")

    interferences = []
    for pos, d in zip(config.source_positions[1:], dry[1:]):
        img = _reverberate(config, pos, d)
        p_i = _power(img[ref])
        if p_i <= 0:
            raise ValueError("an interfering source is silent at the reference microphone")
        interferences.append(img * math.sqrt(p_t / p_i))
    if interferences:
        total = np.sum(interferences, axis=0)
        gain = math.sqrt(p_t / _power(total[ref]) / 10 ** (config.sir_db / 10))
        interferences = [img * gain for img in interferences]
        interference = np.sum(interferences, axis=0)
    else:
        interference = np.zeros_like(target)

    rng = np.random.default_rng([config.seed, 2])
    if config.noise_position is not None:
        raw = (noise_source.samples[0][:n] if noise_source is not None else rng.standard_normal(n))
        if raw.size < n:
            raise ValueError("noise source shorter than the scene")
        noise = _reverberate(config, config.noise_position, raw)
    else:
        noise = rng.standard_normal(target.shape)
    noise = noise * math.sqrt(p_t / 10 ** (config.snr_db / 10) / _power(noise[ref]))

    mixture = target + interference + noise
    return SimulatedScene(
        mixture=TimeSignal(mixture, fs),
        target_reverberant=TimeSignal(target, fs),
        interferences_reverberant=[TimeSignal(i, fs) for i in interferences],
        noise=TimeSignal(noise, fs),
        config=config,
    )


@dataclass
class TestsetPolicy:
    count: int = 20
    seed: int = 0
    speakers: tuple = (2,)
    buckets: tuple = tuple(ANGLE_BUCKETS)
    sir_range: tuple = (-6.0, 6.0)
    snr_range: tuple = (18.0, 30.0)
    room_x: tuple = (5.0, 8.0)
    room_y: tuple = (4.0, 7.0)
    room_z: tuple = (2.7, 3.5)
    distance_range: tuple = (1.0, 2.5)
    absorption_range: tuple = (0.25, 0.6)
    reflection_order: int = 6
    duration: float = 4.0
    sample_rate: int = 16000
    spacings_cm: tuple = field(default_factory=lambda: (8, 6, 6, 4, 4, 2, 2, 2, 2, 4, 4, 6, 6, 8))
    max_attempts: int = 2000

    __test__ = False  # not a pytest class


def _inside(p, room, margin) -> bool:
    return bool(np.all(p > margin) and np.all(p < np.asarray(room) - margin))


def _sample_scene(policy: TestsetPolicy, index: int, rng: np.random.Generator, speakers: int,
                  bucket: str | None, scene_seed: int) -> SceneConfig:
    margin = 0.3
    geom = default_geometry(policy.spacings_cm)
    for _ in range(policy.max_attempts):
        room = [rng.uniform(*policy.room_x), rng.uniform(*policy.room_y), rng.uniform(*policy.room_z)]
        center = np.array([room[0] / 2 + rng.uniform(-0.5, 0.5), room[1] - rng.uniform(0.6, 1.2),
                           rng.uniform(1.0, 1.5)])
        mics = geom.translated(center).mic_positions
        if not all(_inside(m, room, margin) for m in mics):
            continue
        theta_t = rng.uniform(0.0, 180.0)
        doas = [theta_t]
        ok = True
        for _k in range(speakers - 1):
            lo, hi = ANGLE_BUCKETS[bucket]
            sep = rng.uniform(lo, hi)
            cands = [theta_t + sep, theta_t - sep]
            cands = [c for c in cands if 0.0 <= c <= 180.0]
            if not cands:
                ok = False
                break
            doas.append(cands[int(rng.integers(len(cands)))])
        if not ok:
            continue
        sources = []
        for theta in doas:
            dist = rng.uniform(*policy.distance_range)
            p = source_position(center, theta, dist)
            p[2] = center[2] + rng.uniform(-0.2, 0.2)
            sources.append(p)
        if not all(_inside(p, room, margin) for p in sources):
            continue
        return SceneConfig(
            room_dims=room,
            source_positions=[p.tolist() for p in sources],
            mic_positions=mics.tolist(),
            reflection_order=policy.reflection_order,
            absorption=[rng.uniform(*policy.absorption_range)] * 6,
            sample_rate=policy.sample_rate,
            sir_db=rng.uniform(*policy.sir_range),
            snr_db=rng.uniform(*policy.snr_range),
            seed=scene_seed,
            duration=policy.duration,
            scene_id=f"{index:04d}",
            source_doas=[float(d) for d in doas],
            angle_bucket=bucket,
        )
    raise ValueError(f"could not place scene {index} (speakers={speakers}, bucket={bucket}) "
                     f"after {policy.max_attempts} attempts")


def generate_testset(policy: TestsetPolicy) -> list:
    """Deterministic list of scene configurations; scene ``i`` depends only on (seed, i)."""
    if policy.count < 1:
        raise ValueError("count must be >= 1")
    for b in policy.buckets:
        if b not in ANGLE_BUCKETS:
            raise ValueError(f"unknown angle bucket {b!r}; choose from {list(ANGLE_BUCKETS)}")
    if not policy.buckets:
        raise ValueError("at least one angle bucket is required")
    if any(s < 1 for s in policy.speakers):
        raise ValueError("speaker counts must be >= 1")
    scenes = []
    for i in range(policy.count):
        seq = np.random.SeedSequence([policy.seed, i])
        rng = np.random.default_rng(seq)
        speakers = int(policy.speakers[i % len(policy.speakers)])
        bucket = policy.buckets[(i // len(policy.speakers)) % len(policy.buckets)] if speakers > 1 else None
        scene_seed = int(seq.generate_state(1)[0])
        scenes.append(_sample_scene(policy, i, rng, speakers, bucket, scene_seed))
    return scenes


def write_scene(scene: SimulatedScene, directory) -> Path:
    """Write ``scene_<id>/`` with WAV components, the config and a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {"mixture": "mixture.wav", "target": "target.wav", "noise": "noise.wav"}
    write_wav(directory / "mixture.wav", scene.mixture)
    write_wav(directory / "target.wav", scene.target_reverberant)
    write_wav(directory / "noise.wav", scene.noise)
    interf = []
    for k, sig in enumerate(scene.interferences_reverberant):
        name = f"interf_{k}.wav"
        write_wav(directory / name, sig)
        interf.append(name)
    scene.config.save(directory / "config.json")
    manifest = {
        "scene_id": scene.config.scene_id,
        "files": {**files, "interferences": interf, "config": "config.json"},
        "requested": {"sir_db": scene.config.sir_db, "snr_db": scene.config.snr_db},
        "achieved": {k: round(v, 6) for k, v in scene.achieved_ratios().items()},
        "speakers": scene.config.speakers,
        "angle_bucket": scene.config.angle_bucket,
        "ref_channel": scene.config.ref_channel,
        "sample_rate": scene.config.sample_rate,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return directory


def read_scene(directory) -> SimulatedScene:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"{directory} has no manifest.json")
    manifest = json.loads(manifest_path.read_text())
    files = manifest["files"]
    config = SceneConfig.load(directory / files["config"])
    return SimulatedScene(
        mixture=read_wav(directory / files["mixture"]),
        target_reverberant=read_wav(directory / files["target"]),
        interferences_reverberant=[read_wav(directory / f) for f in files["interferences"]],
        noise=read_wav(directory / files["noise"]),
        config=config,
    )
