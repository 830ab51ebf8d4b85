"""Si-SNR / SNR and a per-scene, per-bucket score report."""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .signal import TimeSignal

__all__ = ["SENTINEL", "si_snr", "snr", "ScoreRecord", "ScoreReport", "score_systems"]

SENTINEL = math.inf
RESIDUAL_FLOOR = 1e-30


def _mono(x) -> np.ndarray:
    if isinstance(x, TimeSignal):
        if x.channels != 1:
            raise ValueError("expected a single-channel signal")
        return x.samples[0]
    return np.asarray(x, dtype=np.float64).reshape(-1)


def _pair(estimate, reference):
    est, ref = _mono(estimate), _mono(reference)
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.size} vs {ref.size}")
    return est, ref


def si_snr(estimate, reference, remove_mean: bool = True) -> float:
    """Scale-invariant SNR in dB; returns ``SENTINEL`` (+inf) for a numerically exact match."""
    est, ref = _pair(estimate, reference)
    if remove_mean:
        est = est - est.mean()
        ref = ref - ref.mean()
    ref_energy = float(ref @ ref)
    if ref_energy <= 0:
        raise ValueError("reference has zero power")
    alpha = float(est @ ref) / ref_energy
    target = alpha * ref
    residual = est - target
    p_target = float(target @ target)
    p_residual = float(residual @ residual)
    if p_residual <= RESIDUAL_FLOOR * p_target:
        return SENTINEL
    if p_target == 0:
        return -math.inf
    return 10.0 * math.log10(p_target / p_residual)


def snr(estimate, reference) -> float:
    est, ref = _pair(estimate, reference)
    p_ref = float(ref @ ref)
    if p_ref <= 0:
        raise ValueError("reference has zero power")
    err = est - ref
    p_err = float(err @ err)
    if p_err <= RESIDUAL_FLOOR * p_ref:
        return SENTINEL
    return 10.0 * math.log10(p_ref / p_err)


@dataclass
class ScoreRecord:
    scene_id: str
    system_id: str
    si_snr_db: float
    snr_db: float
    si_snr_improvement_db: float
    angle_bucket: str | None = None
    speakers: int | None = None

    @property
    def sentinel(self) -> bool:
        return math.isinf(self.si_snr_db) and self.si_snr_db > 0

    def to_json(self) -> dict:
        def enc(v):
            return None if not math.isfinite(v) else round(v, 9)

        return {
            "scene_id": self.scene_id,
            "system_id": self.system_id,
            "si_snr_db": enc(self.si_snr_db),
            "snr_db": enc(self.snr_db),
            "si_snr_improvement_db": enc(self.si_snr_improvement_db),
            "sentinel": self.sentinel,
            "angle_bucket": self.angle_bucket,
            "speakers": self.speakers,
        }


@dataclass
class ScoreReport:
    records: list = field(default_factory=list)

    def systems(self) -> list:
        seen = []
        for r in self.records:
            if r.system_id not in seen:
                seen.append(r.system_id)
        return seen

    def aggregate(self) -> dict:
        """Means per system over all scenes, per angle bucket and per speaker count.

        Sentinel (+inf) rows are excluded from the means and counted separately.
        """
        groups = defaultdict(list)
        for r in self.records:
            groups[(r.system_id, "all")].append(r)
            if r.angle_bucket is not None:
                groups[(r.system_id, f"angle {r.angle_bucket}")].append(r)
            if r.speakers is not None:
                groups[(r.system_id, f"{r.speakers} spk")].append(r)
        out = {}
        for key, rows in groups.items():
            finite = [r for r in rows if math.isfinite(r.si_snr_db)]
            out[key] = {
                "count": len(rows),
                "excluded": len(rows) - len(finite),
                "si_snr_db": _mean([r.si_snr_db for r in finite]),
                "snr_db": _mean([r.snr_db for r in rows if math.isfinite(r.snr_db)]),
                "si_snr_improvement_db": _mean([r.si_snr_improvement_db for r in finite]),
            }
        return out

    def mean(self, system_id: str, key: str = "si_snr_db") -> float:
        return self.aggregate()[(system_id, "all")][key]

    def table(self) -> str:
        agg = self.aggregate()
        columns = ["all"] + sorted({k[1] for k in agg if k[1].startswith("angle")},
                                   key=lambda c: float(c.split()[1].split("-")[0])) \
            + sorted({k[1] for k in agg if k[1].endswith("spk")})
        width = max([len(s) for s in self.systems()] + [6])
        lines = ["Si-SNR improvement (dB) over the mixture reference channel",
                 f"{'system':<{width}} | " + " | ".join(f"{c:>12}" for c in columns)]
        lines.append("-" * len(lines[1]))
        for sys_id in self.systems():
            cells = []
            for c in columns:
                entry = agg.get((sys_id, c))
                cells.append(f"{'-':>12}" if entry is None or entry["si_snr_improvement_db"] is None
                             else f"{entry['si_snr_improvement_db']:>12.2f}")
            lines.append(f"{sys_id:<{width}} | " + " | ".join(cells))
        lines.append("")
        lines.append(f"{'system':<{width}} | {'mean Si-SNR':>12} | {'mean SNR':>12} | {'sentinels':>9}")
        for sys_id in self.systems():
            e = agg[(sys_id, "all")]
            si = "-" if e["si_snr_db"] is None else f"{e['si_snr_db']:.2f}"
            sn = "-" if e["snr_db"] is None else f"{e['snr_db']:.2f}"
            lines.append(f"{sys_id:<{width}} | {si:>12} | {sn:>12} | {e['excluded']:>9}")
        return "\n".join(lines) + "\n"

    def write(self, directory) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        records = directory / "scores.jsonl"
        with records.open("w") as fh:
            for r in self.records:
                fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
        table = directory / "summary.txt"
        table.write_text(self.table())
        return records, table


def _mean(values):
    return float(np.mean(values)) if values else None


def score_systems(scenes, outputs: dict, remove_mean: bool = True) -> ScoreReport:
    """Score every system output against each scene's reverberant target on the reference channel.

    ``scenes`` is a sequence of objects with ``config``, ``mixture`` and
    ``target_reverberant`` (e.g. :class:`~mtmvdr.roomsim.SimulatedScene`);
    ``outputs`` maps system id to a ``{scene_id: signal}`` mapping.
    """
    report = ScoreReport()
    for scene in scenes:
        cfg = scene.config
        ref = cfg.ref_channel
        reference = scene.target_reverberant.samples[ref]
        mix = scene.mixture.samples[ref]
        base = si_snr(mix, reference, remove_mean)
        for system_id, per_scene in outputs.items():
            if cfg.scene_id not in per_scene:
                raise KeyError(f"system {system_id!r} has no output for scene {cfg.scene_id}")
            est = _mono(per_scene[cfg.scene_id])
            if est.size != reference.size:
                # latency compensation: outputs are trimmed or zero-extended to the reference length
                est = np.pad(est[: reference.size], (0, max(0, reference.size - est.size)))
            score = si_snr(est, reference, remove_mean)
            report.records.append(ScoreRecord(
                scene_id=cfg.scene_id,
                system_id=system_id,
                si_snr_db=score,
                snr_db=snr(est, reference),
                si_snr_improvement_db=score - base,
                angle_bucket=cfg.angle_bucket,
                speakers=cfg.speakers,
            ))
    return report
