"""On-disk result cache.

Each entry is a pair ``<digest>.npz`` (arrays) and ``<digest>.json``
(metadata: key, cache format version). The digest is the SHA-256 of the
canonical JSON of the key, so any change in field coefficients, k, n_max,
t (rounded to 1e-12) or numerical settings gives a different file.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

CACHE_VERSION = 1


def round_t(t: float) -> float:
    return round(float(t), 12) + 0.0


def key_digest(key: dict) -> str:
    blob = json.dumps(key, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Cache:
    """Key/array store; ``root=None`` disables persistence."""

    def __init__(self, root: str | Path | None):
        self.root = Path(root) if root else None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def _paths(self, key: dict):
        d = key_digest(key)
        return self.root / f"{d}.npz", self.root / f"{d}.json"

    def get(self, key: dict) -> dict | None:
        if self.root is None:
            self.misses += 1
            return None
        npz, meta = self._paths(key)
        if not (npz.exists() and meta.exists()):
            self.misses += 1
            return None
        info = json.loads(meta.read_text())
        if info.get("version") != CACHE_VERSION or info.get("key") != json.loads(json.dumps(key, default=str)):
            self.misses += 1
            return None
        with np.load(npz, allow_pickle=False) as z:
            out = {name: z[name] for name in z.files}
        self.hits += 1
        return out

    def put(self, key: dict, arrays: dict) -> None:
        if self.root is None:
            return
        npz, meta = self._paths(key)
        buf = io.BytesIO()
        np.savez(buf, **{k: np.asarray(v) for k, v in arrays.items()})
        _atomic_write(npz, buf.getvalue())
        info = {"version": CACHE_VERSION, "key": key}
        _atomic_write(meta, json.dumps(info, sort_keys=True, default=str, indent=1).encode())
