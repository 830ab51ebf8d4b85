"""Command-line driver: ``mtmvdr simulate | beamform | evaluate``.

Every option can also come from a JSON file passed with ``--config``; flags
given on the command line win. ``MTMVDR_OUTPUT_ROOT`` and ``MTMVDR_JOBS``
override the default output root and worker count.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .beamformer import DEFAULT_LOADING, save_weights
from .masks import load_mask, save_mask
from .metrics import score_systems
from .pipeline import SystemSpec, enhance
from .roomsim import ANGLE_BUCKETS, TestsetPolicy, generate_testset, read_scene, render_scene, write_scene
from .signal import StftConfig, read_wav, write_wav

log = logging.getLogger("mtmvdr")


class CliError(Exception):
    pass


def _output_root(default: str) -> Path:
    return Path(os.environ.get("MTMVDR_OUTPUT_ROOT", ".")) / default


def _default_jobs() -> int:
    return int(os.environ.get("MTMVDR_JOBS", "1"))


def _run(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _scene_dirs(paths) -> list:
    dirs = []
    for p in map(Path, paths):
        if (p / "manifest.json").exists():
            dirs.append(p)
        else:
            found = sorted(d.parent for d in p.glob("scene_*/manifest.json"))
            if not found:
                raise CliError(f"{p} is neither a scene directory nor contains scene_* directories")
            dirs.extend(found)
    return dirs


# -- simulate ---------------------------------------------------------------

def _render_one(args):
    config, out = args
    scene = render_scene(config)
    write_scene(scene, Path(out) / f"scene_{config.scene_id}")
    return config.scene_id


def cmd_simulate(args) -> int:
    policy = TestsetPolicy(
        count=args.count, seed=args.seed, speakers=tuple(args.speakers), buckets=tuple(args.bucket),
        sir_range=tuple(args.sir_range), snr_range=tuple(args.snr_range),
        reflection_order=args.order, duration=args.duration,
    )
    configs = generate_testset(policy)
    out = Path(args.out) if args.out else _output_root("scenes")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise CliError(f"output directory {out} is not writable")
    _run(_render_one, [(c, str(out)) for c in configs], args.jobs)
    index = {"policy": {k: v for k, v in vars(policy).items()},
             "scenes": [f"scene_{c.scene_id}" for c in configs]}
    (out / "testset.json").write_text(json.dumps(index, indent=2, sort_keys=True, default=list) + "\n")
    print(f"wrote {len(configs)} scenes to {out}")
    return 0


# -- beamform ---------------------------------------------------------------

def _system_from_args(args) -> SystemSpec:
    return SystemSpec(mask=args.mask, noise_mask=args.noise_mask, taps=args.taps, loading=args.loading,
                      ref_channel=args.ref_channel, chunk_seconds=args.chunk_seconds,
                      beamformer=not args.no_beamformer, shifted_taps=args.shifted_taps)


def _beamform_one(job):
    scene_dir, out, system, mask_dir, dump = job
    scene_dir, out = Path(scene_dir), Path(out)
    name = scene_dir.name
    mixture = read_wav(scene_dir / "mixture.wav")
    speech_mask = noise_mask = None
    target = None
    if mask_dir is not None:
        path = Path(mask_dir) / f"{name}.bin"
        if not path.exists():
            raise CliError(f"no imported mask {path}")
        speech_mask = load_mask(path)
        noise_path = Path(mask_dir) / f"{name}.noise.bin"
        if noise_path.exists():
            noise_mask = load_mask(noise_path)
    else:
        target_path = scene_dir / "target.wav"
        if not target_path.exists():
            raise CliError(f"{scene_dir}: oracle masks need target.wav")
        target = read_wav(target_path)
    result = enhance(mixture, system, target=target, speech_mask=speech_mask, noise_mask=noise_mask,
                     config=StftConfig())
    write_wav(out / f"{name}.wav", result.output)
    if dump:
        save_mask(out / f"{name}.mask.bin", result.speech_mask)
        if result.noise_mask is not None:
            save_mask(out / f"{name}.noise_mask.bin", result.noise_mask)
        for k, w in enumerate(result.weights):
            save_weights(out / f"{name}.weights{k}.bin", w)
    return name


def cmd_beamform(args) -> int:
    system = _system_from_args(args)
    dirs = _scene_dirs(args.scenes)
    out = Path(args.out) if args.out else _output_root("enhanced")
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(str(d), str(out), system, args.mask_dir, args.dump) for d in dirs]
    _run(_beamform_one, jobs, args.jobs)
    (out / "system.json").write_text(json.dumps(vars(system), indent=2, sort_keys=True) + "\n")
    print(f"enhanced {len(dirs)} scenes into {out}")
    return 0


# -- evaluate ---------------------------------------------------------------

def _parse_system(text: str):
    if "=" in text:
        name, path = text.split("=", 1)
        return name, path
    if text in ("mixture", "reference"):
        return text, None
    raise CliError(f"--system expects NAME=DIR, 'mixture' or 'reference', got {text!r}")


def cmd_evaluate(args) -> int:
    if not args.scenes or not args.system:
        raise CliError("evaluate needs --scenes and at least one --system")
    dirs = _scene_dirs(args.scenes)
    scenes = [read_scene(d) for d in dirs]
    outputs = {}
    for text in args.system:
        name, path = _parse_system(text)
        per_scene = {}
        for d, scene in zip(dirs, scenes):
            ref = scene.config.ref_channel
            if path is None:
                sig = scene.mixture if name == "mixture" else scene.target_reverberant
                per_scene[scene.config.scene_id] = sig.samples[ref]
                continue
            wav = Path(path) / f"{d.name}.wav"
            if not wav.exists():
                raise CliError(f"system {name!r}: missing output {wav}")
            per_scene[scene.config.scene_id] = read_wav(wav).samples[0]
        outputs[name] = per_scene
    report = score_systems(scenes, outputs, remove_mean=not args.no_mean_removal)
    out = Path(args.out) if args.out else _output_root("report")
    records, table = report.write(out)
    sys.stdout.write(report.table())
    print(f"records: {records}\nsummary: {table}")
    return 0


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtmvdr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("--jobs", type=int, default=_default_jobs(), help="parallel scenes (default 1)")
    common.add_argument("--out", help="output directory")

    p = sub.add_parser("simulate", parents=[common], help="render a seeded set of scenes")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--speakers", type=int, nargs="+", default=[2], choices=[1, 2, 3])
    p.add_argument("--bucket", nargs="+", default=list(ANGLE_BUCKETS), choices=list(ANGLE_BUCKETS))
    p.add_argument("--sir-range", type=float, nargs=2, default=[-6.0, 6.0])
    p.add_argument("--snr-range", type=float, nargs=2, default=[18.0, 30.0])
    p.add_argument("--order", type=int, default=6, help="image-source reflection order")
    p.add_argument("--duration", type=float, default=4.0, help="seconds")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("beamform", parents=[common], help="enhance scenes with oracle or imported masks")
    p.add_argument("scenes", nargs="+", help="scene directories or a root holding scene_*")
    p.add_argument("--mask", choices=["sigmoid", "relu", "cm"], default="cm")
    p.add_argument("--noise-mask", choices=["oracle", "complement"], default="oracle")
    p.add_argument("--taps", type=int, default=3)
    p.add_argument("--loading", type=float, default=DEFAULT_LOADING, help="relative diagonal loading")
    p.add_argument("--ref-channel", type=int, default=0)
    p.add_argument("--chunk-seconds", type=float, default=None,
                   help="per-chunk covariance statistics (e.g. 4); default whole utterance")
    p.add_argument("--no-beamformer", action="store_true", help="plain masking of the reference channel")
    p.add_argument("--shifted-taps", action="store_true", help="weight tap l with the mask of frame t-l")
    p.add_argument("--mask-dir", help="directory with imported <scene>.bin masks")
    p.add_argument("--dump", action="store_true", help="also write masks and weights")
    p.set_defaults(func=cmd_beamform)

    p = sub.add_parser("evaluate", parents=[common], help="score system outputs against the scenes")
    p.add_argument("--scenes", nargs="+")
    p.add_argument("--system", action="append",
                   help="NAME=DIR with <scene>.wav outputs, or 'mixture' / 'reference'")
    p.add_argument("--no-mean-removal", action="store_true", help="Si-SNR without mean removal")
    p.set_defaults(func=cmd_evaluate)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv):
    args, _ = parser.parse_known_args(argv)
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text())
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in data.items()})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: bad --config file: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CliError, ValueError, KeyError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
