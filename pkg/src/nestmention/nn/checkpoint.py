"""Checkpoint container: an ``.npz`` archive of named row-major float64 arrays
plus a JSON header carrying the format version and arbitrary metadata.
"""

from __future__ import annotations

import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Mapping

import numpy as np

FORMAT_VERSION = 1
_HEADER_KEY = "__header__"


class CheckpointError(ValueError):
    pass


def save_arrays(path, arrays: Mapping[str, np.ndarray], metadata: Mapping[str, Any] | None = None) -> None:
    """Write atomically: a temporary file in the target directory is renamed into place."""
    path = Path(path)
    header = {
        "format_version": FORMAT_VERSION,
        "shapes": {name: list(np.shape(a)) for name, a in arrays.items()},
        "metadata": dict(metadata or {}),
    }
    if _HEADER_KEY in arrays:
        raise CheckpointError(f"{_HEADER_KEY!r} is a reserved name")
    payload = {name: np.ascontiguousarray(a, dtype=np.float64) for name, a in arrays.items()}
    payload[_HEADER_KEY] = np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **payload)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_arrays(path, expected_shapes: Mapping[str, tuple] | None = None) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint; with ``expected_shapes`` every name and shape must match exactly."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no checkpoint at {path}")
    with np.load(path, allow_pickle=False) as z:
        if _HEADER_KEY not in z:
            raise CheckpointError(f"{path} has no header")
        header = json.loads(bytes(z[_HEADER_KEY]).decode("utf-8"))
        arrays = {name: z[name] for name in z.files if name != _HEADER_KEY}
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {header.get('format_version')!r}")
    for name, shape in header["shapes"].items():
        if name not in arrays or list(arrays[name].shape) != list(shape):
            raise CheckpointError(f"array {name!r} disagrees with the header")
    if expected_shapes is not None:
        missing = sorted(set(expected_shapes) - set(arrays))
        extra = sorted(set(arrays) - set(expected_shapes))
        if missing or extra:
            raise CheckpointError(f"parameter names differ: missing {missing}, unexpected {extra}")
        for name, shape in expected_shapes.items():
            if tuple(arrays[name].shape) != tuple(shape):
                raise CheckpointError(f"{name}: expected shape {tuple(shape)}, found {arrays[name].shape}")
    return arrays, header["metadata"]
