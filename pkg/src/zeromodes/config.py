"""Run configuration: field presets, k ranges, tolerances, paths."""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from .sphere import SphereScalar, flux

DEFAULT_SCHEDULE = (8, 12, 16, 24, 32, 40, 48, 64, 80, 96)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FieldSpec:
    """Either a named preset or an explicit list of (l, m, re, im) terms."""

    preset: str
    coefficients: tuple = ()

    def build(self) -> SphereScalar:
        name = self.preset.strip()
        if name == "constant":
            return SphereScalar.constant(0.5)
        m = re.fullmatch(r"tilted:c=([-+0-9.eE]+)", name)
        if m:
            try:
                c = float(m.group(1))
            except ValueError as exc:
                raise ConfigError(f"bad tilt coefficient in preset {name!r}") from exc
            return SphereScalar.constant(0.5, 1) + SphereScalar.coordinate(3, c)
        if name == "custom":
            if not self.coefficients:
                raise ConfigError("custom field needs a nonempty coefficient list")
            terms = {}
            for entry in self.coefficients:
                if len(entry) not in (3, 4):
                    raise ConfigError(f"coefficient entry {entry!r} must be [l, m, re] or [l, m, re, im]")
                l, mm = int(entry[0]), int(entry[1])
                if abs(mm) > l:
                    raise ConfigError(f"invalid harmonic index ({l}, {mm})")
                terms[(l, mm)] = complex(float(entry[2]), float(entry[3]) if len(entry) == 4 else 0.0)
            f = SphereScalar.from_dict(terms)
            if f.reality_defect() > 1e-12:
                raise ConfigError("custom coefficients violate f_{l,-m} = (-1)^m conj(f_{l,m})")
            return f
        raise ConfigError(f"unknown field preset {name!r}; use 'constant', 'tilted:c=<real>' or 'custom'")

    def label(self) -> str:
        return self.preset


@dataclass(frozen=True)
class RunConfig:
    field: FieldSpec = field(default_factory=lambda: FieldSpec("tilted:c=1"))
    k_values: tuple = (1, 2, 3, 4)
    T_max: float = 4.5
    schedule: tuple = DEFAULT_SCHEDULE
    converge_tol: float = 1e-8
    t_samples: int = 65
    margin: int = 2
    zero_tol: float = 1e-8
    tangency_tol: float = 1e-12
    window_tol: float = 1e-8
    boundary_tol: float = 1e-8
    eps: float | None = None
    R: float | None = None
    cache_dir: str | None = None
    out_dir: str = "out"
    jobs: int = 1
    fmt: str = "csv"

    def __post_init__(self):
        for name in ("converge_tol", "zero_tol", "tangency_tol", "window_tol", "boundary_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.k_values:
            raise ConfigError("k range is empty")
        if self.t_samples < 3:
            raise ConfigError("t_samples must be >= 3")
        if self.margin < 1:
            raise ConfigError("margin must be >= 1")
        if self.fmt not in ("csv", "json-lines"):
            raise ConfigError(f"unknown output format {self.fmt!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        beta = self.field.build()
        phi = flux(beta)
        if abs(phi - 1.0) > 1e-9:
            raise ConfigError(
                f"field flux is {phi:.12g}; only unit flux is accepted (rescale the field and T instead)"
            )

    def beta(self) -> SphereScalar:
        return self.field.build()

    def eps_for(self, k: int) -> float:
        return math.exp(-math.sqrt(abs(k))) if self.eps is None else self.eps

    def R_for(self, k: int) -> float:
        return abs(k) ** 0.25 if self.R is None else self.R

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    def numerics_key(self) -> dict:
        """Settings that change numerical results (not paths or parallelism)."""
        d = asdict(self)
        for k in ("cache_dir", "out_dir", "jobs", "fmt", "k_values", "T_max"):
            d.pop(k)
        d["field_hash"] = self.beta().content_hash()
        return d

    def digest(self) -> str:
        d = asdict(self)
        for k in ("cache_dir", "out_dir", "jobs"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _k_values(raw: dict) -> tuple:
    if "k" in raw and raw["k"] is not None:
        v = raw["k"]
        if isinstance(v, (list, tuple)):
            if len(v) == 2 and all(isinstance(x, int) for x in v) and "k_list" not in raw:
                lo, hi = v
                return tuple(range(lo, hi + 1))
            return tuple(int(x) for x in v)
        return (int(v),)
    if "k_max" in raw and raw["k_max"] is not None:
        return tuple(range(1, int(raw["k_max"]) + 1))
    return RunConfig.k_values


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw or {})
    fld = raw.pop("field", "tilted:c=1")
    if isinstance(fld, str):
        fspec = FieldSpec(fld)
    elif isinstance(fld, dict):
        fspec = FieldSpec(str(fld.get("preset", "custom")), tuple(tuple(e) for e in fld.get("coefficients", ())))
    else:
        raise ConfigError("field must be a preset string or a mapping")
    kv = _k_values(raw)
    for key in ("k", "k_max", "k_list"):
        raw.pop(key, None)
    known = set(RunConfig.__dataclass_fields__) - {"field", "k_values"}
    aliases = {"cache": "cache_dir", "out": "out_dir", "format": "fmt"}
    kw = {}
    for key, val in raw.items():
        key = aliases.get(key, key)
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        kw[key] = tuple(val) if key == "schedule" else val
    return RunConfig(field=fspec, k_values=kv, **kw)


def load_config(path: str | Path | None) -> RunConfig:
    """Read a YAML or JSON config file (JSON is valid YAML)."""
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{p} must contain a mapping at top level")
    return config_from_dict(raw or {})
