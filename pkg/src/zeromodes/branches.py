"""Eigenvalue branches over the flux window and the zero-mode counts.

For each k the operators H(t) = D - t Sigma_alpha are followed over
t in [k - 1/2, k + 1/2]. Branches are the sector-wise sorted singular
value curves (with their mirror images and the exact kernel), which keeps
avoided crossings intact. Counts come from the roots of

    g_n(t) = 4 mu_n(t)^2 + (t - k)^2 - 1/4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from .dirac import DiracFamily, DiracSystem, Sector

TANGENCY_TOL = 1e-12
ROOT_TOL = 1e-10
OVERLAP_FLOOR = 0.5


def default_eps(k: int) -> float:
    return math.exp(-math.sqrt(abs(k)))


def default_R(k: int) -> float:
    return abs(k) ** 0.25


# ---------------------------------------------------------------------------
# t grid


@dataclass(frozen=True)
class TGrid:
    k: int
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 2 or np.any(np.diff(s) <= 0):
            raise ValueError("t samples must be strictly increasing")
        if s[0] != self.k - 0.5 or s[-1] != self.k + 0.5:
            raise ValueError("t grid must start at k - 1/2 and end at k + 1/2")
        object.__setattr__(self, "samples", s)

    @classmethod
    def uniform(cls, k: int, M: int = 65) -> "TGrid":
        s = np.linspace(k - 0.5, k + 0.5, M)
        s[0], s[-1] = k - 0.5, k + 0.5
        return cls(k, s)

    @property
    def max_step(self) -> float:
        return float(np.diff(self.samples).max())

    def refined(self, intervals, factor: int = 4) -> "TGrid":
        """Split the listed intervals [t_i, t_{i+1}] into ``factor`` pieces."""
        s = list(self.samples)
        extra = []
        for i in sorted(set(intervals)):
            a, b = self.samples[i], self.samples[i + 1]
            extra.extend(a + (b - a) * j / factor for j in range(1, factor))
        return TGrid(self.k, np.unique(np.concatenate([s, extra])))

    def halved(self) -> "TGrid":
        return self.refined(range(len(self.samples) - 1), 2)


# ---------------------------------------------------------------------------
# branches


@dataclass
class EigenBranch:
    """One eigenvalue curve mu_n(t) sampled on a TGrid.

    ``evaluator`` returns mu_n at an arbitrary t in the window and is used
    for root refinement.
    """

    branch_id: int
    t: np.ndarray
    mu: np.ndarray
    is_zero_branch: bool
    evaluator: Callable[[float], float] | None = None
    sector: int | None = None
    sign: int = 0
    rank: int = 0
    vectors: np.ndarray | None = field(default=None, repr=False)
    min_overlap: float = 1.0

    def value(self, t: float) -> float:
        if self.evaluator is None:
            return float(np.interp(t, self.t, self.mu))
        return self.evaluator(t)

    def value_at_center(self, k: int) -> float:
        i = int(np.argmin(np.abs(self.t - k)))
        if abs(self.t[i] - k) > 1e-14:
            return self.value(k)
        return float(self.mu[i])

    @classmethod
    def synthetic(cls, k: int, fn: Callable[[float], float], grid: TGrid | None = None, branch_id: int = 0) -> "EigenBranch":
        grid = grid or TGrid.uniform(k)
        mu = np.array([fn(t) for t in grid.samples])
        return cls(branch_id, grid.samples, mu, bool(np.all(mu == 0.0)), fn)


class _SectorEvaluator:
    """Sorted positive singular values of one sector at arbitrary t."""

    def __init__(self, family: DiracFamily, si: int):
        self.sec: Sector = family.sigma.sectors[si]
        self.D = family.free_blocks[si]
        self.S = family.sigma.blocks[si]
        self._cache: dict[float, np.ndarray] = {}

    def singular_values(self, t: float) -> np.ndarray:
        s = self._cache.get(t)
        if s is None:
            p = self.sec.n_plus
            A = (self.D - t * self.S)[p:, :p]
            s = np.sort(np.linalg.svd(A, compute_uv=False)) if A.size else np.zeros(0)
            self._cache[t] = s
        return s

    def branch(self, rank: int, sign: int) -> Callable[[float], float]:
        return lambda t: sign * float(self.singular_values(float(t))[rank])


@dataclass
class BranchSet:
    k: int
    grid: TGrid
    branches: list
    window: float
    refinements: int = 0
    overlap_failures: tuple = ()

    @property
    def zero_branches(self) -> list:
        return [b for b in self.branches if b.is_zero_branch]

    def values(self) -> np.ndarray:
        return np.array([b.mu for b in self.branches])


def _overlaps(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    return np.abs(np.einsum("ij,ij->j", prev.conj(), cur))


def _cluster_overlap(prevV, curV, vals, tol=1e-10) -> np.ndarray:
    """Per-column overlap, with near-degenerate clusters matched as subspaces."""
    n = len(vals)
    out = _overlaps(prevV, curV)
    i = 0
    while i < n:
        j = i + 1
        while j < n and abs(vals[j] - vals[i]) < tol:
            j += 1
        if j - i > 1:
            sv = np.linalg.svd(prevV[:, i:j].conj().T @ curV[:, i:j], compute_uv=False)
            out[i:j] = sv.min()
        i = j
    return out


def _sector_track(family: DiracFamily, si: int, ts: np.ndarray):
    """Sector spectra (values, vectors, zero flags) along ts."""
    vals, vecs, zero = [], [], None
    for t in ts:
        sys = family.at_sector(si, t)
        vals.append(sys.values)
        vecs.append(sys.vectors)
        zero = sys.zero
    return np.array(vals), vecs, zero


def track_branches(
    family: DiracFamily,
    grid: TGrid | None = None,
    window: float = 0.5,
    overlap_floor: float = OVERLAP_FLOOR,
    max_refine: int = 3,
    keep_vectors: bool = False,
) -> BranchSet:
    """Follow every branch that enters [-window, window] somewhere on the grid.

    Consecutive eigenvectors along a branch must overlap by more than
    ``overlap_floor``; offending intervals are refined up to ``max_refine``
    times and then reported in ``overlap_failures``.
    """
    if window < 0.5:
        raise ValueError("working window must contain [-1/2, 1/2]")
    k = family.k
    grid = grid or TGrid.uniform(k)
    nsec = len(family.sigma.sectors)
    refinements = 0
    while True:
        ts = grid.samples
        per_sector = [_sector_track(family, si, ts) for si in range(nsec)]
        bad = set()
        for vals, vecs, _ in per_sector:
            for i in range(len(ts) - 1):
                ov = _cluster_overlap(vecs[i], vecs[i + 1], vals[i + 1])
                sel = np.abs(vals[i + 1]) <= window
                if np.any(ov[sel] < overlap_floor):
                    bad.add(i)
        if not bad or refinements >= max_refine:
            break
        grid = grid.refined(bad)
        refinements += 1

    failures = tuple(sorted((float(grid.samples[i]), float(grid.samples[i + 1])) for i in bad))
    raw = []
    for si, (vals, vecs, zero) in enumerate(per_sector):
        ev = _SectorEvaluator(family, si)
        size = vals.shape[1]
        n_nonzero = int(np.sum(~zero)) // 2
        for col in range(size):
            mu = vals[:, col]
            if not zero[col] and np.min(np.abs(mu)) > window:
                continue
            ovl = 1.0
            for i in range(len(ts) - 1):
                ov = _cluster_overlap(vecs[i], vecs[i + 1], vals[i + 1])
                ovl = min(ovl, float(ov[col]))
            if zero[col]:
                sign, rank, fn = 0, 0, (lambda t: 0.0)
            else:
                sign = 1 if col >= size - n_nonzero else -1
                rank = (col - (size - n_nonzero)) if sign > 0 else (n_nonzero - 1 - col)
                fn = ev.branch(rank, sign)
            vec = np.array([v[:, col] for v in vecs]) if keep_vectors else None
            raw.append((float(mu[len(ts) // 2]), si, col, mu, bool(zero[col]), fn, sign, rank, vec, ovl))
    raw.sort(key=lambda r: (r[0], r[1], r[2]))
    branches = [
        EigenBranch(bid, ts, mu, z, fn, si, sign, rank, vec, ovl)
        for bid, (_, si, _col, mu, z, fn, sign, rank, vec, ovl) in enumerate(raw)
    ]
    return BranchSet(k, grid, branches, window, refinements, failures)


def match_branches(prevV: np.ndarray, curV: np.ndarray) -> np.ndarray:
    """Assignment of current eigenvectors to previous ones by maximal overlap."""
    cost = -np.abs(prevV.conj().T @ curV)
    _, cols = linear_sum_assignment(cost)
    return cols


# ---------------------------------------------------------------------------
# counting


@dataclass(frozen=True)
class Crossing:
    branch_id: int
    t: float
    sign: int
    kind: str = "root"  # or "tangency"


@dataclass(frozen=True)
class CountReport:
    k: int
    N: int
    M: int
    crossings: tuple
    n_eps: int
    d_eps_R: int
    eps: float
    R: float
    tangency_flags: tuple = ()
    total_pairs: int = 0
    zero_branches: int = 0

    @property
    def identity_holds(self) -> bool:
        return self.N - self.M == abs(self.k)

    def row(self) -> dict:
        return {
            "k": self.k,
            "N": self.N,
            "M": self.M,
            "n_eps": self.n_eps,
            "d_eps_R": self.d_eps_R,
            "eps": self.eps,
            "R": self.R,
            "tangency_flags": ";".join(f"{b}@{t:.10f}" for b, t in self.tangency_flags),
        }


def _g(mu: float, t: float, k: int) -> float:
    return 4.0 * mu * mu + (t - k) ** 2 - 0.25


def branch_roots(branch: EigenBranch, k: int, tangency_tol: float = TANGENCY_TOL, xtol: float = ROOT_TOL):
    """Roots of g on a nonzero branch, plus tangencies counted as double roots."""
    ts = branch.t
    g = np.array([_g(m, t, k) for m, t in zip(branch.mu, ts)])
    G = lambda t: _g(branch.value(t), t, k)
    roots, tangencies = [], []
    for i in range(len(ts) - 1):
        a, b = ts[i], ts[i + 1]
        if g[i] == 0.0:
            roots.append(float(a))
            continue
        if g[i] * g[i + 1] < 0:
            roots.append(float(brentq(G, a, b, xtol=xtol)))
    if g[-1] == 0.0:
        roots.append(float(ts[-1]))
    # hidden dips: local minima of g on the samples without a sign change nearby
    for i in range(1, len(ts) - 1):
        if not (g[i] <= g[i - 1] and g[i] <= g[i + 1]) or g[i] < 0:
            continue
        lo, hi = ts[i - 1], ts[i + 1]
        res = minimize_scalar(G, bounds=(lo, hi), method="bounded", options={"xatol": xtol})
        gmin, tmin = float(res.fun), float(res.x)
        if gmin < 0:
            # two roots hidden between samples
            if G(lo) > 0 and not any(lo < r < tmin for r in roots):
                roots.append(float(brentq(G, lo, tmin, xtol=xtol)))
            if G(hi) > 0 and not any(tmin < r < hi for r in roots):
                roots.append(float(brentq(G, tmin, hi, xtol=xtol)))
        elif gmin < tangency_tol:
            tangencies.append(tmin)
    return sorted(set(roots)), tangencies


def count_crossings(
    branches: BranchSet | list,
    k: int | None = None,
    n_eps: int = 0,
    d_eps_R: int = 0,
    eps: float = math.nan,
    R: float = math.nan,
    tangency_tol: float = TANGENCY_TOL,
) -> CountReport:
    """N and M from the solutions of 4 mu^2 + (t-k)^2 = 1/4 on the branches.

    Zero branches contribute the two endpoint pairs each. Roots on positive
    branches are counted into M. Tangencies count as two pairs and are
    flagged.
    """
    if isinstance(branches, BranchSet):
        k = branches.k if k is None else k
        blist = branches.branches
    else:
        blist = list(branches)
    if k is None:
        raise ValueError("k is required for a bare branch list")
    total = 0
    M = 0
    crossings, flags = [], []
    zeros = 0
    for br in blist:
        if br.is_zero_branch:
            zeros += 1
            total += 2
            continue
        roots, tang = branch_roots(br, k, tangency_tol)
        sign = br.sign if br.sign else (1 if np.median(br.mu) > 0 else -1)
        nr = len(roots) + 2 * len(tang)
        total += nr
        if sign > 0:
            M += nr
        crossings.extend(Crossing(br.branch_id, r, sign) for r in roots)
        crossings.extend(Crossing(br.branch_id, r, sign, "tangency") for r in tang)
        flags.extend((br.branch_id, r) for r in tang)
    if total % 2:
        raise ValueError(f"odd number of solution pairs ({total}) at k={k}: boundary or tangency ambiguity")
    N = total // 2
    return CountReport(k, N, M, tuple(crossings), n_eps, d_eps_R, eps, R, tuple(flags), total, zeros)


def azm_counts(sys_at_k: DiracSystem | np.ndarray, eps: float, R: float) -> tuple[int, int]:
    """(n_eps, d_eps_R) from the spectrum of H at t = k."""
    ev = sys_at_k.eigenvalues if isinstance(sys_at_k, DiracSystem) else np.asarray(sys_at_k)
    a = np.abs(ev)
    n_eps = int(np.sum(a <= eps))
    if R < eps:
        return n_eps, 0
    return n_eps, int(np.sum(a <= R)) - n_eps


# ---------------------------------------------------------------------------
# perturbation checks


@dataclass(frozen=True)
class Violation:
    branch_id: int
    t: float
    lhs: float
    rhs: float
    which: str


def envelope_check(branches: BranchSet | list, k: int, a: float, slack: float = 1e-6) -> list:
    """Violations of exp(-a|t-k|)|mu(k)| <= |mu(t)| <= exp(a|t-k|)|mu(k)|."""
    blist = branches.branches if isinstance(branches, BranchSet) else branches
    out = []
    for br in blist:
        m0 = abs(br.value_at_center(k))
        for t, m in zip(br.t, br.mu):
            e = math.exp(a * abs(t - k))
            lo, hi = m0 / e, m0 * e
            if abs(m) < lo - slack:
                out.append(Violation(br.branch_id, float(t), abs(m), lo, "lower"))
            if abs(m) > hi + slack:
                out.append(Violation(br.branch_id, float(t), abs(m), hi, "upper"))
    return out


@dataclass(frozen=True)
class AlignmentReport:
    pairs: tuple  # (i, j, |<xi_i, S xi_j>|, bound)
    violations: tuple
    kernel_max: float

    @property
    def ok(self) -> bool:
        return not self.violations


def alignment_check(
    values: np.ndarray,
    vectors: np.ndarray,
    sigma_prime: np.ndarray,
    sup_prime: float,
    pairs=None,
    is_zero=None,
    slack: float = 1e-6,
) -> AlignmentReport:
    """|<xi_1, sigma(alpha') xi_2>| <= pi (|l_1| + |l_2|) ||alpha'||_inf."""
    n = len(values)
    if pairs is None:
        pairs = [(i, j) for i in range(n) for j in range(i, n)]
    SV = sigma_prime @ vectors
    rows, bad = [], []
    kmax = 0.0
    for i, j in pairs:
        lhs = float(abs(np.vdot(vectors[:, i], SV[:, j])))
        rhs = math.pi * (abs(values[i]) + abs(values[j])) * sup_prime
        rows.append((i, j, lhs, rhs))
        if lhs > rhs + slack:
            bad.append((i, j, lhs, rhs))
        if is_zero is not None and is_zero[i] and is_zero[j]:
            kmax = max(kmax, lhs)
    return AlignmentReport(tuple(rows), tuple(bad), kmax)
