"""Command-line entry point.

Every subcommand writes its tables into ``--out`` and finishes with
``manifest.json`` listing the files and their SHA-256 sums.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import pipeline
from .cache import Cache
from .config import ConfigError, RunConfig, load_config
from .hopf import assemble_s3_spectrum, fit_asymptotics, flux_interval_index, zcount
from .io import (
    ASYMPTOTIC_HEADER,
    AUDIT_HEADER,
    BRANCH_HEADER,
    COUNT_HEADER,
    FIELD_HEADER,
    PENCIL_HEADER,
    S3_HEADER,
    SPECTRUM_HEADER,
    VALIDATION_HEADER,
    ZTABLE_HEADER,
    RunManifest,
    extension,
    write_table,
)
from .kernels import BACKEND
from .sphere import QuadratureGrid, abs_flux, curl_residual, flux

SUBCOMMANDS = ("field-inspect", "spectrum", "branches", "count", "pencil-check", "zcount", "validate")


class StageError(RuntimeError):
    def __init__(self, stage: str, k=None, t=None, cause: BaseException | None = None):
        where = "".join(f" {n}={v}" for n, v in (("k", k), ("t", t)) if v is not None)
        super().__init__(f"stage {stage}{where}: {cause}")
        self.stage, self.k, self.t = stage, k, t


class ValidationFailed(RuntimeError):
    pass


class _Run:
    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cache = Cache(cfg.cache_dir)
        cfg_dict = {
            "field": cfg.field.preset,
            "coefficients": [list(c) for c in cfg.field.coefficients],
            "k_values": list(cfg.k_values),
            "T_max": cfg.T_max,
            "numerics": {k: v for k, v in cfg.numerics_key().items() if k != "field"},
            "format": cfg.fmt,
        }
        self.manifest = RunManifest(command, cfg.digest(), cfg_dict, backend=BACKEND)

    def table(self, stem: str, rows, header):
        p = write_table(self.out / f"{stem}.{extension(self.cfg.fmt)}", rows, header, self.cfg.fmt)
        self.manifest.add(p)

    def stage(self, name: str, fn, *args, k=None, t=None):
        t0 = time.perf_counter()
        try:
            return fn(*args)
        except (KeyboardInterrupt, ConfigError, StageError):
            raise
        except Exception as exc:
            raise StageError(name, k, t, exc) from exc
        finally:
            self.manifest.timings[name if k is None else f"{name}[k={k}]"] = round(time.perf_counter() - t0, 6)

    def finish(self) -> RunManifest:
        self.manifest.cache = {"hits": self.cache.hits, "misses": self.cache.misses}
        self.manifest.write(self.out)
        return self.manifest


# ---------------------------------------------------------------------------
# subcommands


def _field_inspect(run: _Run):
    beta = run.cfg.beta()
    pot = run.stage("gauge", pipeline.gauge_for, run.cfg)
    L = max(beta.L, 1)
    rows = [
        ("preset", run.cfg.field.preset),
        ("band_limit", beta.L),
        ("flux", flux(beta)),
        ("abs_flux", run.stage("abs_flux", abs_flux, beta)),
        ("sup_norm_raw", pot.raw_sup),
        ("sup_norm", pot.sup_norm),
        ("sup_grid_nodes", pot.grid_nodes),
        ("a", pot.a),
        ("gauge_residual", curl_residual(pot, beta, QuadratureGrid.for_band_limit(L, 3))),
        ("m_support", " ".join(str(m) for m in beta.m_support())),
        ("content_hash", beta.content_hash()),
    ]
    run.table("field", rows, FIELD_HEADER)
    run.table("validation", [c.row() for c in run.stage("sphere_suite", pipeline.sphere_suite, run.cfg)], VALIDATION_HEADER)


def _spectrum(run: _Run, t_values):
    cfg = run.cfg
    rows = []
    per_t: dict = {}
    for k in cfg.k_values:
        ts = t_values if t_values else (k - 0.5, k, k + 0.5)
        for t in ts:
            sp = run.stage("spectrum", pipeline.spectrum, cfg, k, t, run.cache, k=k, t=t)
            rows.extend((k, float(t), sp["n_max"], i, v, z) for i, (v, z) in enumerate(zip(sp["values"], sp["is_zero"])))
            per_t.setdefault(float(t), {})[k] = sp["values"]
    run.table("spectrum", rows, SPECTRUM_HEADER)
    if t_values:
        s3rows = []
        for t in sorted(per_t):
            spec = per_t[t]
            # eigenvalues up to the smallest truncation edge are complete
            cap = min(float(np.abs(v).max()) for v in spec.values()) * 0.5
            s3 = assemble_s3_spectrum(t, spec, cap)
            s3rows.extend((it.value, it.multiplicity, it.provenance) for it in s3.items if abs(it.value + 0.5) < s3.coverage)
        run.table("s3_spectrum", s3rows, S3_HEADER)


def _counts(run: _Run, ks):
    res = run.stage("count", pipeline.count_many, run.cfg, ks, None, run.cache)
    for k in ks:
        run.manifest.timings[f"count[k={k}]"] = round(res[k].seconds, 6)
    return res


def _branches(run: _Run):
    res = _counts(run, run.cfg.k_values)
    rows = [r for k in run.cfg.k_values for r in res[k].branch_rows]
    run.table("branches", rows, BRANCH_HEADER)


def _count(run: _Run):
    ks = run.cfg.k_values
    res = _counts(run, ks)
    run.table("counts", [res[k].report.row() for k in ks], COUNT_HEADER)
    nonzero = {k: res[k].report.N for k in ks if k != 0}
    if len(nonzero) >= 4:
        fit = fit_asymptotics(nonzero, abs_flux(run.cfg.beta()))
        run.table("asymptotics", fit.rows(), ASYMPTOTIC_HEADER)


def _pencil(run: _Run):
    prow, arow = [], []
    for k in run.cfg.k_values:
        pr = run.stage("pencil", pipeline.pencil_k, run.cfg, k, run.cache, k=k)
        prow.append((k, pr.N_direct, pr.N_pencil, pr.N_direct == pr.N_pencil))
        for name, lhs, rhs, pre in pr.audit:
            margin = rhs - lhs
            arow.append((k, name, lhs, rhs, margin, pre, margin >= 0))
    run.table("pencil", prow, PENCIL_HEADER)
    run.table("audit", arow, AUDIT_HEADER)
    if any(not r[3] for r in prow):
        raise ValidationFailed("pencil count disagrees with the direct count")


def _zcount(run: _Run):
    T_max = run.cfg.T_max
    kT = flux_interval_index(T_max)
    ks = list(range(0, kT + 1)) if T_max >= 0 else list(range(kT, 1))
    res = _counts(run, ks)
    counts = {k: res[k].report.N for k in ks}
    step = 0.5
    n = int(math.floor(abs(T_max) / step + 1e-9))
    Ts = [math.copysign(i * step, T_max) for i in range(0, n + 1)]
    if abs(Ts[-1]) < abs(T_max):
        Ts.append(float(T_max))
    table = zcount(run.cfg.beta(), counts, Ts)
    run.table("ztable", table.as_rows(), ZTABLE_HEADER)


def _validate(run: _Run):
    checks = run.stage("validate", pipeline.validate, run.cfg, 6, run.cache)
    run.table("validation", [c.row() for c in checks], VALIDATION_HEADER)
    bad = [c for c in checks if not c.ok]
    if bad:
        names = ", ".join(f"{c.suite}/{c.name}" + ("" if c.k is None else f"[k={c.k}]") for c in bad[:8])
        raise ValidationFailed(f"{len(bad)} check(s) failed: {names}")


def run_pipeline(cfg: RunConfig, subcommand: str, t_values=()) -> RunManifest:
    """Run one subcommand and write its outputs plus the manifest.

    Raises :class:`ValidationFailed` after writing everything when a check
    fails, so the outputs stay inspectable.
    """
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    run = _Run(cfg, subcommand)
    failure = None
    try:
        if subcommand == "field-inspect":
            _field_inspect(run)
        elif subcommand == "spectrum":
            _spectrum(run, tuple(t_values))
        elif subcommand == "branches":
            _branches(run)
        elif subcommand == "count":
            _count(run)
        elif subcommand == "pencil-check":
            _pencil(run)
        elif subcommand == "zcount":
            _zcount(run)
        else:
            _validate(run)
    except ValidationFailed as exc:
        failure = exc
    manifest = run.finish()
    if failure is not None:
        raise failure
    return manifest


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zeromodes", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", metavar="PATH", help="YAML or JSON run configuration")
    p.add_argument("--field", help="field preset, e.g. constant or tilted:c=1")
    p.add_argument("--k", type=int, nargs="+", help="explicit k values")
    p.add_argument("--k-max", type=int, help="use k = 1..K")
    p.add_argument("--T-max", type=float)
    p.add_argument("--t", type=float, nargs="+", help="spectrum: flux parameters to sample")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--cache", metavar="DIR")
    p.add_argument("--jobs", type=int)
    p.add_argument("--format", choices=("csv", "json-lines"))
    return p


def config_from_args(ns) -> RunConfig:
    cfg = load_config(ns.config)
    over = {}
    if ns.field:
        from .config import FieldSpec

        over["field"] = FieldSpec(ns.field)
    if ns.k:
        over["k_values"] = tuple(ns.k)
    elif ns.k_max is not None:
        if ns.k_max < 1:
            raise ConfigError("--k-max must be >= 1")
        over["k_values"] = tuple(range(1, ns.k_max + 1))
    for attr, key in (("T_max", "T_max"), ("out", "out_dir"), ("cache", "cache_dir"), ("jobs", "jobs"), ("format", "fmt")):
        v = getattr(ns, attr)
        if v is not None:
            over[key] = v
    return cfg.with_(**over) if over else cfg


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        manifest = run_pipeline(cfg, ns.command, ns.t or ())
    except ValidationFailed as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, StageError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(manifest.files)} file(s) to {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
