"""Atomic artifact writers: CSV, JSON (NaN/inf become null) and framed binary dumps."""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Union

import numpy as np

PathLike = Union[str, os.PathLike]


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def sanitize(obj: Any) -> Any:
    """Recursively convert numpy types to Python ones and non-finite floats to ``None``."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, complex):
        return [sanitize(obj.real), sanitize(obj.imag)]
    return obj


def dumps_json(obj: Any) -> str:
    return json.dumps(sanitize(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: PathLike, obj: Any) -> Path:
    return atomic_write_text(path, dumps_json(obj))


def write_binary(path: PathLike, array: np.ndarray, **meta: Any) -> tuple[Path, Path]:
    """Little-endian float64 records plus a ``<path>.json`` sidecar with shape and metadata."""
    a = np.ascontiguousarray(array, dtype="<f8")
    path = Path(path)
    atomic_write_bytes(path, a.tobytes())
    side = path.with_name(path.name + ".json")
    write_json(side, {"dtype": "<f8", "shape": list(a.shape), "order": "C", **meta})
    return path, side


def read_binary(path: PathLike) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    data = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(meta["shape"])
    return data, meta
