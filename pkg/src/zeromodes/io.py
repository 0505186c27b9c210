"""Tabular output (CSV or JSON lines) and the run manifest."""

from __future__ import annotations

import hashlib
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

COUNT_HEADER = ("k", "N", "M", "n_eps", "d_eps_R", "eps", "R", "tangency_flags")
BRANCH_HEADER = ("k", "branch_id", "t", "mu", "is_zero_branch")
ZTABLE_HEADER = ("T", "lower", "exact_partial", "upper")
S3_HEADER = ("value", "multiplicity", "provenance")
ASYMPTOTIC_HEADER = ("k", "N", "ratio", "target", "deviation")
AUDIT_HEADER = ("k", "name", "lhs", "rhs", "margin", "precondition", "holds")
PENCIL_HEADER = ("k", "N_direct", "N_pencil", "agree")
VALIDATION_HEADER = ("suite", "check", "k", "value", "threshold", "ok")
SPECTRUM_HEADER = ("k", "t", "n_max", "index", "value", "is_zero")
FIELD_HEADER = ("quantity", "value")


def fmt_value(v) -> str:
    """Deterministic text form: repr for floats, plain for the rest."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v + 0.0)
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v + 0.0 if math.isfinite(v) else str(v)
    return v


def _csv_cell(s: str) -> str:
    if any(c in s for c in ',"\n'):
        return '"' + s.replace('"', '""') + '"'
    return s


def render(rows, header, fmt: str = "csv") -> str:
    """Rows (dicts or sequences) as CSV or JSON lines.

    An empty row list gives a header-only CSV and an empty JSON-lines file.
    """
    lines = []
    if fmt == "csv":
        lines.append(",".join(header))
    elif fmt != "json-lines":
        raise ValueError(f"unknown format {fmt!r}")
    for r in rows:
        vals = [r[h] for h in header] if isinstance(r, dict) else list(r)
        if len(vals) != len(header):
            raise ValueError(f"row has {len(vals)} fields, header has {len(header)}")
        if fmt == "csv":
            lines.append(",".join(_csv_cell(fmt_value(v)) for v in vals))
        else:
            lines.append(json.dumps({h: _json_value(v) for h, v in zip(header, vals)}, allow_nan=False))
    return "\n".join(lines) + ("\n" if lines else "")


def extension(fmt: str) -> str:
    return "csv" if fmt == "csv" else "jsonl"


def write_table(path: Path, rows, header, fmt: str = "csv") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render(rows, header, fmt))
    return path


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """What a run produced, under which settings, and how long it took."""

    command: str
    config_digest: str
    config: dict
    files: dict = field(default_factory=dict)  # name -> sha256
    timings: dict = field(default_factory=dict)
    cache: dict = field(default_factory=dict)
    backend: str = ""

    def add(self, path: Path) -> None:
        path = Path(path)
        self.files[path.name] = sha256_file(path)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "backend": self.backend,
            "config_digest": self.config_digest,
            "config": self.config,
            "files": dict(sorted(self.files.items())),
            "timings": self.timings,
            "cache": self.cache,
        }

    def write(self, out_dir: Path) -> Path:
        p = Path(out_dir) / "manifest.json"
        p.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=str) + "\n")
        return p
