"""From sphere spectra to zero-mode counts on R^3.

The 3-sphere spectrum at flux parameter t is assembled from the sphere
operators H_k(t) for all k; the kernel on R^3 has the same dimension.
Zero modes at t come from two sources: the value -1/2 - sgn(k)(k - t),
which vanishes at t = k + sgn(k)/2 with multiplicity |k|, and the positive
eigenvalues lambda of H_k(t) with 4 lambda^2 + (k - t)^2 = 1/4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sphere import FluxError, SphereScalar, flux


def sgn(k: int) -> int:
    return (k > 0) - (k < 0)


# ---------------------------------------------------------------------------
# 3-sphere spectrum


@dataclass(frozen=True)
class S3SpectrumItem:
    value: float
    multiplicity: int
    provenance: str


@dataclass(frozen=True)
class S3Spectrum:
    t: float
    items: tuple
    coverage: float  # values v with |v + 1/2| < coverage are complete
    collisions: tuple = ()

    def values(self, radius: float | None = None) -> np.ndarray:
        r = self.coverage if radius is None else radius
        out = []
        for it in self.items:
            if abs(it.value + 0.5) < r:
                out.extend([it.value] * it.multiplicity)
        return np.sort(np.array(out))


def assemble_s3_spectrum(t: float, spectra: dict, lam_cap: float, collision_tol: float = 1e-9) -> S3Spectrum:
    """Items of the 3-sphere spectrum from ``{k: eigenvalues of H_k(t)}``.

    ``spectra[k]`` must contain every eigenvalue of H_k(t) up to ``lam_cap``
    in modulus. The returned ``coverage`` is the radius about -1/2 inside
    which the list is complete given the k range supplied.
    """
    if not spectra:
        raise ValueError("need at least one k")
    ks = sorted(spectra)
    items = []
    for k in ks:
        if k != 0:
            items.append(S3SpectrumItem(-0.5 - sgn(k) * (k - t), abs(k), f"Sigma({k})"))
        ev = np.asarray(spectra[k])
        pos = np.sort(ev[(ev > 0) & (ev <= lam_cap)])
        # merge equal eigenvalues into one item with multiplicity
        i = 0
        while i < len(pos):
            j = i + 1
            while j < len(pos) and pos[j] - pos[i] <= 1e-12 * max(1.0, pos[i]):
                j += 1
            lam = float(pos[i])
            r = math.sqrt(4 * lam * lam + (k - t) ** 2)
            items.append(S3SpectrumItem(-0.5 + r, j - i, f"SqrtBranch({k},{lam:.12g},+)"))
            items.append(S3SpectrumItem(-0.5 - r, j - i, f"SqrtBranch({k},{lam:.12g},-)"))
            i = j
    outside = min(abs(ks[0] - 1 - t), abs(ks[-1] + 1 - t))
    coverage = min(2.0 * lam_cap, outside)
    items.sort(key=lambda it: (it.value, it.provenance))
    collisions = []
    for a, b in zip(items, items[1:]):
        if abs(a.value - b.value) <= collision_tol and a.provenance.split("(")[0] != b.provenance.split("(")[0]:
            collisions.append((a.provenance, b.provenance, a.value))
    return S3Spectrum(float(t), tuple(items), coverage, tuple(collisions))


# ---------------------------------------------------------------------------
# kernel dimension


@dataclass(frozen=True)
class KernelDimension:
    t: float
    value: int
    alternative: int | None = None  # count if near-boundary events were included


def kernel_dimension(t: float, reports: dict, tol: float = 1e-8, guard: float = 1e-6) -> KernelDimension:
    """dim Ker at flux parameter t from the per-k count reports.

    Events within ``tol`` of t are counted; events in (tol, guard] make the
    result ambiguous and the alternative count is reported alongside.
    """
    value, near = 0, 0
    for k in range(math.floor(t - 0.5 - guard), math.ceil(t + 0.5 + guard) + 1):
        if k != 0:
            d = abs(t - (k + sgn(k) * 0.5))
            if d <= tol:
                value += abs(k)
            elif d <= guard:
                near += abs(k)
        rep = reports.get(k)
        if rep is None:
            if abs(k - t) <= 0.5 + guard and k != 0:
                raise KeyError(f"no count report for k={k} (needed at t={t})")
            continue
        for c in rep.crossings:
            if c.sign <= 0:
                continue
            d = abs(c.t - t)
            mult = 2 if c.kind == "tangency" else 1
            if d <= tol:
                value += mult
            elif d <= guard:
                near += mult
    return KernelDimension(float(t), value, value + near if near else None)


def kernel_events(reports: dict) -> list:
    """All (t, multiplicity) zero-mode events from the count reports."""
    ev = []
    for k, rep in sorted(reports.items()):
        if k != 0:
            ev.append((k + sgn(k) * 0.5, abs(k)))
        for c in rep.crossings:
            if c.sign > 0:
                ev.append((c.t, 2 if c.kind == "tangency" else 1))
    return sorted(ev)


def events_in_interval(reports: dict, k: int) -> int:
    """Sum of kernel dimensions over t in the half-open flux interval of k."""
    lo, hi = k - 0.5, k + 0.5
    total = 0
    for t, m in kernel_events(reports):
        if k > 0 and lo < t <= hi or k < 0 and lo <= t < hi or k == 0 and lo <= t <= hi:
            total += m
    return total


# ---------------------------------------------------------------------------
# counting function


@dataclass(frozen=True)
class ZRow:
    T: float
    lower: int
    exact_partial: int
    upper: int


@dataclass(frozen=True)
class ZTable:
    rows: tuple
    field_hash: str = ""

    def as_rows(self) -> list:
        return [{"T": r.T, "lower": r.lower, "exact_partial": r.exact_partial, "upper": r.upper} for r in self.rows]


def flux_interval_index(T: float) -> int:
    """The k whose half-open flux interval contains T."""
    if -0.5 <= T <= 0.5:
        return 0
    if T > 0:
        return math.ceil(T - 0.5)
    return math.floor(T + 0.5)


def require_unit_flux(beta: SphereScalar, tol: float = 1e-9) -> None:
    phi = flux(beta)
    if abs(phi - 1.0) > tol:
        raise FluxError(
            f"flux {phi:.12g} != 1; rescale: Z for flux F equals Z for the unit-flux field beta/F at T*F"
        )


def zcount(beta: SphereScalar, counts: dict, T_values) -> ZTable:
    """Brackets and exact partial sums of the counting function.

    ``counts`` maps k to N^(k); every k between 0 and the largest needed
    index must be present.
    """
    require_unit_flux(beta)
    rows = []
    for T in sorted(T_values):
        kT = flux_interval_index(T)
        if T >= 0:
            need = range(0, kT + 1)
            lower_ks = range(1, kT)
            exact_ks = [k for k in range(1, kT + 1) if k + 0.5 <= T]
        else:
            need = range(kT, 1)
            lower_ks = range(kT + 1, 0)
            exact_ks = [k for k in range(kT, 0) if k - 0.5 >= T]
        missing = [k for k in need if k not in counts]
        if missing:
            raise KeyError(f"missing N^(k) for k in {missing}")
        lower = sum(counts[k] for k in lower_ks)
        upper = sum(counts[k] for k in need)
        exact = sum(counts[k] for k in exact_ks)
        rows.append(ZRow(float(T), int(lower), int(exact), int(upper)))
    return ZTable(tuple(rows), beta.content_hash())


# ---------------------------------------------------------------------------
# asymptotics


@dataclass(frozen=True)
class AsymptoticFit:
    ks: np.ndarray
    N: np.ndarray
    target: float
    slope: float  # least squares over the top half of the k range
    slope_full: float
    ratios: np.ndarray
    deviations: np.ndarray
    deviation_trend: float  # least-squares slope of the deviation series
    z_target: float | None = None
    z_ratios: np.ndarray | None = None

    def rows(self) -> list:
        return [
            {"k": int(k), "N": int(n), "ratio": float(r), "target": self.target, "deviation": float(d)}
            for k, n, r, d in zip(self.ks, self.N, self.ratios, self.deviations)
        ]


def _ls_slope(x, y) -> float:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xc = x - x.mean()
    return float(xc @ (y - y.mean()) / (xc @ xc))


def fit_asymptotics(counts: dict, target: float, flux_value: float = 1.0, z_table: ZTable | None = None) -> AsymptoticFit:
    """Slope of N^(k) against |k| and the deviation series from the target."""
    if len(counts) < 4:
        raise ValueError("need counts for at least 4 values of k")
    ks = np.array(sorted(counts, key=abs))
    a = np.abs(ks).astype(float)
    N = np.array([counts[k] for k in ks], dtype=float)
    half = a >= np.median(a)
    slope = _ls_slope(a[half], N[half])
    ratios = N / a
    dev = np.abs(ratios - target)
    zt, zr = None, None
    if z_table is not None:
        zt = 0.5 * abs(flux_value) * target
        zr = np.array([r.exact_partial / r.T**2 for r in z_table.rows if r.T > 0])
    return AsymptoticFit(ks, N.astype(int), target, slope, _ls_slope(a, N), ratios, dev, _ls_slope(a, dev), zt, zr)
