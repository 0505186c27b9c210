"""Per-k computations with caching, and the invariant suites."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .branches import (
    CountReport,
    Crossing,
    TGrid,
    alignment_check,
    azm_counts,
    count_crossings,
    envelope_check,
    track_branches,
)
from .cache import Cache, round_t
from .config import RunConfig
from .dirac import build_family, converge
from .pencil import Constants, build_pencil, kappa_bounds_violations, kappa_direct, kappa_pm, pencil_audit, pencil_count
from .sphere import (
    OneFormPair,
    QuadratureGrid,
    abs_flux,
    calculus_identities,
    curl_residual,
    flux,
    hodge_gauge,
    integrate,
    kernel_integral,
    sh_analyze,
)


def gauge_for(cfg: RunConfig):
    return hodge_gauge(cfg.beta(), 1)


# ---------------------------------------------------------------------------
# truncation


def choose_n_max(cfg: RunConfig, k: int, cache: Cache) -> tuple[int, bool, np.ndarray]:
    key = {"stage": "converge", "k": k, **cfg.numerics_key()}
    hit = cache.get(key)
    if hit is not None:
        return int(hit["n_max"]), bool(hit["converged"]), hit["table"]
    pot = gauge_for(cfg)
    rep = converge(k, pot, [k - 1, k - 0.5, k, k + 0.5], cfg.converge_tol, cfg.schedule, cfg.margin)
    table = np.array(rep.table, dtype=float).reshape(-1, 3)
    cache.put(key, {"n_max": rep.n_max, "converged": rep.converged, "table": table})
    return rep.n_max, rep.converged, table


def family_for(cfg: RunConfig, k: int, cache: Cache):
    n_max, ok, _ = choose_n_max(cfg, k, cache)
    return build_family(k, gauge_for(cfg), n_max, cfg.margin), n_max, ok


# ---------------------------------------------------------------------------
# spectra


def spectrum(cfg: RunConfig, k: int, t: float, cache: Cache, n_max: int | None = None) -> dict:
    """Eigenvalues and kernel flags of H_k(t), cached by (field, k, n_max, t)."""
    if n_max is None:
        n_max, _, _ = choose_n_max(cfg, k, cache)
    key = {
        "stage": "spectrum",
        "field_hash": cfg.beta().content_hash(),
        "k": k,
        "n_max": n_max,
        "t": round_t(t),
        "margin": cfg.margin,
    }
    hit = cache.get(key)
    if hit is not None:
        return {"values": hit["values"], "is_zero": hit["is_zero"], "n_max": n_max}
    fam = build_family(k, gauge_for(cfg), n_max, cfg.margin)
    sys = fam.at(t)
    out = {"values": sys.eigenvalues, "is_zero": sys.is_zero}
    cache.put(key, out)
    return {**out, "n_max": n_max}


# ---------------------------------------------------------------------------
# counting


@dataclass
class KResult:
    k: int
    n_max: int
    converged: bool
    report: CountReport
    branch_rows: list
    seconds: float = 0.0
    cached: bool = False


_KINDS = ("root", "tangency")


def _pack(res: KResult) -> dict:
    rep = res.report
    cr = rep.crossings
    br = res.branch_rows
    return {
        "meta": np.array([res.n_max, int(res.converged), rep.N, rep.M, rep.n_eps, rep.d_eps_R, rep.total_pairs, rep.zero_branches]),
        "epsR": np.array([rep.eps, rep.R]),
        "cross_id": np.array([c.branch_id for c in cr], dtype=int),
        "cross_t": np.array([c.t for c in cr], dtype=float),
        "cross_sign": np.array([c.sign for c in cr], dtype=int),
        "cross_kind": np.array([_KINDS.index(c.kind) for c in cr], dtype=int),
        "flag_id": np.array([f[0] for f in rep.tangency_flags], dtype=int),
        "flag_t": np.array([f[1] for f in rep.tangency_flags], dtype=float),
        "br_id": np.array([r[1] for r in br], dtype=int),
        "br_t": np.array([r[2] for r in br], dtype=float),
        "br_mu": np.array([r[3] for r in br], dtype=float),
        "br_zero": np.array([r[4] for r in br], dtype=bool),
    }


def _unpack(k: int, z: dict) -> KResult:
    n_max, conv, N, M, n_eps, d, total, zeros = (int(x) for x in z["meta"])
    eps, R = (float(x) for x in z["epsR"])
    cr = tuple(
        Crossing(int(i), float(t), int(s), _KINDS[int(kd)])
        for i, t, s, kd in zip(z["cross_id"], z["cross_t"], z["cross_sign"], z["cross_kind"])
    )
    flags = tuple((int(i), float(t)) for i, t in zip(z["flag_id"], z["flag_t"]))
    rep = CountReport(k, N, M, cr, n_eps, d, eps, R, flags, total, zeros)
    rows = [(k, int(i), float(t), float(m), bool(zf)) for i, t, m, zf in zip(z["br_id"], z["br_t"], z["br_mu"], z["br_zero"])]
    return KResult(k, n_max, bool(conv), rep, rows, 0.0, True)


def count_k(cfg: RunConfig, k: int, cache: Cache | None = None) -> KResult:
    cache = cache or Cache(cfg.cache_dir)
    t0 = time.perf_counter()
    n_max, ok, _ = choose_n_max(cfg, k, cache)
    key = {"stage": "count", "k": k, "n_max": n_max, **cfg.numerics_key()}
    hit = cache.get(key)
    if hit is not None:
        res = _unpack(k, hit)
        res.seconds = time.perf_counter() - t0
        return res
    fam = build_family(k, gauge_for(cfg), n_max, cfg.margin)
    bs = track_branches(fam, TGrid.uniform(k, cfg.t_samples))
    eps, R = cfg.eps_for(k), cfg.R_for(k)
    spec = spectrum(cfg, k, k, cache, n_max)
    n_eps, d = azm_counts(spec["values"], eps, R)
    rep = count_crossings(bs, k, n_eps, d, eps, R, cfg.tangency_tol)
    rows = [(k, b.branch_id, float(t), float(m), b.is_zero_branch) for b in bs.branches for t, m in zip(b.t, b.mu)]
    res = KResult(k, n_max, ok, rep, rows, time.perf_counter() - t0, False)
    cache.put(key, _pack(res))
    return res


def _count_job(args):
    cfg, k = args
    return count_k(cfg, k)


def count_many(cfg: RunConfig, ks, jobs: int | None = None, cache: Cache | None = None) -> dict:
    """Count results for every k, in parallel when ``jobs`` > 1."""
    jobs = cfg.jobs if jobs is None else jobs
    ks = list(ks)
    if jobs <= 1 or len(ks) <= 1:
        cache = cache or Cache(cfg.cache_dir)
        return {k: count_k(cfg, k, cache) for k in ks}
    # largest k first keeps the pool busy
    order = sorted(ks, key=lambda k: -abs(k))
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        results = list(ex.map(_count_job, [(cfg, k) for k in order]))
    return {r.k: r for r in sorted(results, key=lambda r: ks.index(r.k))}


# ---------------------------------------------------------------------------
# pencil


@dataclass
class PencilResult:
    k: int
    N_direct: int
    N_pencil: int
    psq2: float
    sigma2: float
    audit: list = field(default_factory=list)  # (name, lhs, rhs, precondition)


def pencil_k(cfg: RunConfig, k: int, cache: Cache | None = None, audit: bool = True) -> PencilResult:
    cache = cache or Cache(cfg.cache_dir)
    kres = count_k(cfg, k, cache)
    key = {"stage": "pencil", "k": k, "n_max": kres.n_max, "audit": audit, **cfg.numerics_key()}
    hit = cache.get(key)
    if hit is not None:
        names = [str(x) for x in hit["names"]]
        rows = [(n, float(a), float(b), bool(p)) for n, a, b, p in zip(names, hit["lhs"], hit["rhs"], hit["pre"])]
        return PencilResult(k, int(hit["meta"][0]), int(hit["meta"][1]), float(hit["res"][0]), float(hit["res"][1]), rows)
    fam = build_family(k, gauge_for(cfg), kres.n_max, cfg.margin)
    ps = build_pencil(fam)
    pc = pencil_count(ps, cfg.boundary_tol)
    rows = []
    if audit:
        pot = gauge_for(cfg)
        for r in pencil_audit(ps, cfg.eps_for(k), cfg.R_for(k), pot.sup_norm, kres.report.N):
            rows.append((r.name, r.lhs, r.rhs, r.precondition))
    res = PencilResult(k, kres.report.N, pc.N, ps.diagnostics["psq2"], ps.diagnostics["sigma2"], rows)
    cache.put(
        key,
        {
            "meta": np.array([res.N_direct, res.N_pencil]),
            "res": np.array([res.psq2, res.sigma2]),
            "names": np.array([r[0] for r in rows], dtype="U32"),
            "lhs": np.array([r[1] for r in rows], dtype=float),
            "rhs": np.array([r[2] for r in rows], dtype=float),
            "pre": np.array([r[3] for r in rows], dtype=bool),
        },
    )
    return res


# ---------------------------------------------------------------------------
# invariant suites


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    k: int | None
    value: float
    threshold: float
    ok: bool

    def row(self) -> dict:
        return {
            "suite": self.suite,
            "check": self.name,
            "k": "" if self.k is None else self.k,
            "value": self.value,
            "threshold": self.threshold,
            "ok": int(self.ok),
        }


def _le(suite, name, k, value, thr) -> Check:
    return Check(suite, name, k, float(value), float(thr), bool(value <= thr))


def sphere_suite(cfg: RunConfig, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    beta = cfg.beta()
    L = max(beta.L, 1)
    out = []
    g = QuadratureGrid.for_band_limit(L)
    out.append(_le("sphere", "flux_quadrature", None, abs(integrate(beta.synthesize(g), g) / (2 * math.pi) - flux(beta)), 1e-12))
    back = sh_analyze(beta.synthesize(g), g, L)
    out.append(_le("sphere", "roundtrip", None, np.abs(back.coeffs - beta.resized(L).coeffs).max(), 1e-12))
    pot = hodge_gauge(beta, 1)
    out.append(_le("sphere", "gauge_residual", None, curl_residual(pot, beta, QuadratureGrid.for_band_limit(L, 3)), 1e-8))
    af = abs_flux(beta)
    out.append(_le("sphere", "abs_flux_ge_flux", None, abs(flux(beta)) - af, 1e-12))
    ratios = []
    for _ in range(20):
        pair = OneFormPair.random(4, rng)
        rep = calculus_identities(pair, QuadratureGrid.gauss(48, 96), n_radial=64)
        ratios.append(rep.l1_ratio)
    out.append(_le("sphere", "l1_ratio_max", None, max(ratios), 1 + 1e-6))
    ys = rng.normal(size=(5, 3))
    errs = [max(abs(v / (2 * math.pi**2) - 1) for v in kernel_integral(y)) for y in ys]
    out.append(_le("sphere", "kernel_2pi2_relerr", None, max(errs), 1e-3))
    return out


def dirac_suite(cfg: RunConfig, k: int, cache: Cache) -> list:
    fam, n_max, ok = family_for(cfg, k, cache)
    pot = gauge_for(cfg)
    out = [Check("dirac", "converged", k, float(n_max), float(cfg.schedule[-1]), ok)]
    out.append(_le("dirac", "sigma_hermitian", k, fam.sigma.hermiticity_defect, 1e-12))
    out.append(_le("dirac", "sigma_anticommutes", k, fam.sigma.anticommutator_defect, 1e-8))
    out.append(_le("dirac", "sigma_norm_minus_sup", k, fam.sigma.norm - pot.sup_norm, 0.05))
    for t in (k - 0.5, k, k + 0.5):
        sys = fam.at(t)
        nrm = sys.norm
        out.append(Check("dirac", f"kernel_count@t={t:g}", k, sys.kernel_count(cfg.zero_tol), abs(k), sys.kernel_count(cfg.zero_tol) == abs(k)))
        rest = np.abs(sys.eigenvalues[np.abs(sys.eigenvalues) >= cfg.zero_tol])
        gap = float(rest.min()) if rest.size else math.inf
        out.append(Check("dirac", f"gap@t={t:g}", k, gap, 0.5, gap > 0.5))
        out.append(_le("dirac", f"symmetry@t={t:g}", k, sys.symmetry_defect(), 1e-9))
        out.append(_le("dirac", f"chirality@t={t:g}", k, sys.chirality_defect(), 1e-8))
        out.append(_le("dirac", f"residual@t={t:g}", k, sys.residual(), 1e-10 * nrm))
    return out


def counting_suite(cfg: RunConfig, k: int, cache: Cache, kres: KResult | None = None) -> list:
    kres = kres or count_k(cfg, k, cache)
    rep = kres.report
    pot = gauge_for(cfg)
    out = [Check("count", "N_minus_M", k, rep.N - rep.M, abs(k), rep.N - rep.M == abs(k))]
    C1 = Constants(pot.a, pot.sup_norm).C1
    if rep.eps <= 1 / C1:
        out.append(Check("count", "N_ge_n_eps", k, rep.N, rep.n_eps, rep.N >= rep.n_eps))
    fam, _, _ = family_for(cfg, k, cache)
    bs = track_branches(fam, TGrid.uniform(k, cfg.t_samples))
    out.append(_le("count", "envelope_violations", k, len(envelope_check(bs, k, pot.a)), 0))
    sys = fam.at(k)
    n = min(20, sys.basis.dim)
    order = np.argsort(np.abs(sys.eigenvalues), kind="stable")[:n]
    vals = sys.eigenvalues[order]
    vecs = sys.eigenvectors[:, order]
    al = alignment_check(vals, vecs, fam.sigma.matrix(), pot.sup_norm, is_zero=sys.is_zero[order])
    out.append(_le("count", "alignment_violations", k, len(al.violations), 0))
    out.append(_le("count", "kernel_alignment", k, al.kernel_max, 1e-6))
    return out


def pencil_suite(cfg: RunConfig, k: int, cache: Cache) -> list:
    pr = pencil_k(cfg, k, cache, audit=False)
    return [
        Check("pencil", "N_pencil_eq_N_direct", k, pr.N_pencil, pr.N_direct, pr.N_pencil == pr.N_direct),
        _le("pencil", "psq2_residual", k, pr.psq2, 1e-9),
        _le("pencil", "sigma2_residual", k, pr.sigma2, 1e-10),
    ]


def kappa_suite(seed: int = 0, n: int = 1000) -> list:
    rng = np.random.default_rng(seed)
    ds = rng.uniform(-10, 10, n)
    worst, viol = 0.0, 0
    for d in ds:
        kp = kappa_pm(d)
        a, b = kappa_direct(d)
        worst = max(worst, abs(a - kp.plus), abs(b - kp.minus))
        viol += len(kappa_bounds_violations(d, kp))
    k0 = kappa_pm(0.0)
    return [
        _le("kappa", "direct_vs_roots", None, worst, 1e-12),
        _le("kappa", "bound_violations", None, viol, 0),
        Check("kappa", "kappa_at_zero", None, k0.plus, 2.0, k0.plus == 2.0 and k0.minus == -2.0 / 3.0),
    ]


def validate(cfg: RunConfig, pencil_k_max: int = 6, cache: Cache | None = None) -> list:
    cache = cache or Cache(cfg.cache_dir)
    checks = sphere_suite(cfg) + kappa_suite()
    results = count_many(cfg, cfg.k_values, cache=cache)
    for k in cfg.k_values:
        checks += dirac_suite(cfg, k, cache)
        checks += counting_suite(cfg, k, cache, results[k])
        if abs(k) <= pencil_k_max:
            checks += pencil_suite(cfg, k, cache)
    return checks
