"""Raw binary tensor files.

Payload: row-major, little-endian float64; complex tensors are stored as
interleaved (re, im) pairs. A JSON sidecar ``<file>.json`` records the shape,
whether the payload is complex, and optional free-form metadata, so readers
that already know the shape (e.g. a mask exporter in another toolkit) can
ignore it.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = ["save_tensor", "load_tensor"]


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def save_tensor(path, array, meta: dict | None = None) -> Path:
    path = Path(path)
    array = np.asarray(array)
    is_complex = np.iscomplexobj(array)
    if is_complex:
        payload = np.stack([array.real, array.imag], axis=-1).astype("<f8")
    else:
        payload = array.astype("<f8")
    path.write_bytes(np.ascontiguousarray(payload).tobytes())
    header = {"shape": list(array.shape), "complex": bool(is_complex), "dtype": "<f8"}
    if meta:
        header["meta"] = meta
    _sidecar(path).write_text(json.dumps(header, sort_keys=True, indent=1) + "\n")
    return path


def load_tensor(path, shape=None, is_complex=None):
    """Load a tensor; returns ``(array, meta)``.

    ``shape``/``is_complex`` override the sidecar and are required when it is absent.
    """
    path = Path(path)
    meta = {}
    side = _sidecar(path)
    if side.exists():
        header = json.loads(side.read_text())
        meta = header.get("meta", {})
        shape = tuple(header["shape"]) if shape is None else tuple(shape)
        is_complex = header["complex"] if is_complex is None else is_complex
    if shape is None or is_complex is None:
        raise ValueError(f"{path}: no sidecar found, shape and is_complex must be given")
    flat = np.frombuffer(path.read_bytes(), dtype="<f8")
    expected = int(np.prod(shape)) * (2 if is_complex else 1)
    if flat.size != expected:
        raise ValueError(f"{path}: payload has {flat.size} values, shape {shape} needs {expected}")
    if is_complex:
        pairs = flat.reshape(tuple(shape) + (2,))
        return pairs[..., 0] + 1j * pairs[..., 1], meta
    return flat.reshape(shape).astype(np.float64), meta
