"""Truncated monopole Dirac operators on the 2-sphere.

Spinors of the spin-c bundle with half Chern number ``k`` are expanded in
spin-weighted harmonics. The positive chirality half carries spin weight
w+ = -(k-1)/2 and the negative half w- = w+ - 1; shells are indexed by
n >= 0 with total angular momentum j = (|k|-1)/2 + n. The free operator
pairs (+, j, m) with (-, j, m) and has eigenvalues +-sqrt(n(n+|k|)).

Everything multiplying by a scalar potential commutes with the azimuthal
symmetry modulo the harmonic orders present in the potential, so matrices
are stored as a list of independent *sectors* (classes of m). Dense
matrices of the whole truncation are assembled only on request.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial.legendre import leggauss

from .kernels import wigner_d_rows
from .sphere import GaugePotential, GridError, SphereScalar

ZERO_TOL = 1e-8


class ConvergenceError(RuntimeError):
    """Truncation schedule exhausted before eigenvalues settled."""


# ---------------------------------------------------------------------------
# basis


@dataclass(frozen=True)
class ModeLabel:
    chirality: int  # +1 for L+, -1 for L-
    n: int
    two_j: int
    two_m: int
    two_w: int


def spin_weights(k: int) -> tuple[int, int]:
    """Doubled spin weights (2w+, 2w-) of the two chirality line bundles."""
    two_wp = -(k - 1)
    return two_wp, two_wp - 2


def free_eigenvalue(n: int, k: int) -> float:
    return math.sqrt(n * (n + abs(k)))


@dataclass(frozen=True)
class SpinorBasis:
    """Mode labels of the truncated spinor space, shell-major.

    The order is the kernel block (n = 0, |k| labels), then for each
    n = 1..n_max the + block followed by the - block, each sorted by m.
    """

    k: int
    n_max: int

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")

    @cached_property
    def labels(self) -> tuple[ModeLabel, ...]:
        two_j0 = abs(self.k) - 1
        out = []
        for n in range(self.n_max + 1):
            two_j = two_j0 + 2 * n
            if two_j < 0:
                continue
            for chi, two_w in zip((1, -1), spin_weights(self.k)):
                if two_j < abs(two_w):
                    continue
                out.extend(ModeLabel(chi, n, two_j, two_m, two_w) for two_m in range(-two_j, two_j + 1, 2))
        return tuple(out)

    @property
    def dim(self) -> int:
        return len(self.labels)

    @cached_property
    def chirality(self) -> np.ndarray:
        return np.array([lab.chirality for lab in self.labels])

    @cached_property
    def shell(self) -> np.ndarray:
        return np.array([lab.n for lab in self.labels])

    @property
    def kernel_chirality(self) -> int:
        return 1 if self.k > 0 else -1

    @property
    def two_j_max(self) -> int:
        return abs(self.k) - 1 + 2 * self.n_max

    def expected_dim(self) -> int:
        k = abs(self.k)
        return k + 2 * sum(2 * n + k for n in range(1, self.n_max + 1))


# ---------------------------------------------------------------------------
# sectors


def m_modulus(psi: SphereScalar | None, tol: float = 1e-15) -> int:
    """gcd of the azimuthal orders present in psi (0 when axisymmetric)."""
    if psi is None:
        return 0
    g = 0
    for m in psi.m_support(tol):
        g = math.gcd(g, abs(m))
    return g


@dataclass(frozen=True)
class Sector:
    """Modes closed under the operators; + modes first, then - modes."""

    key: int
    index: np.ndarray  # positions in SpinorBasis.labels
    labels: tuple
    n_plus: int

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def n_minus(self) -> int:
        return self.size - self.n_plus

    @property
    def structural_zeros(self) -> int:
        return abs(self.n_plus - self.n_minus)

    @cached_property
    def chirality(self) -> np.ndarray:
        return np.array([lab.chirality for lab in self.labels])


def build_sectors(basis: SpinorBasis, modulus: int) -> list[Sector]:
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(basis.labels):
        key = lab.two_m if modulus == 0 else lab.two_m % (2 * modulus)
        groups.setdefault(key, []).append(i)
    out = []
    for key in sorted(groups):
        idx = sorted(groups[key], key=lambda i: (-basis.labels[i].chirality, basis.labels[i].two_m, basis.labels[i].two_j))
        labs = tuple(basis.labels[i] for i in idx)
        n_plus = sum(1 for lab in labs if lab.chirality == 1)
        out.append(Sector(key, np.array(idx, dtype=int), labs, n_plus))
    return out


def sector_free_block(sec: Sector, k: int) -> np.ndarray:
    """Free Dirac operator restricted to a sector."""
    D = np.zeros((sec.size, sec.size), dtype=complex)
    pos = {(lab.chirality, lab.two_j, lab.two_m): i for i, lab in enumerate(sec.labels)}
    for i, lab in enumerate(sec.labels):
        if lab.chirality != 1 or lab.n == 0:
            continue
        p = pos.get((-1, lab.two_j, lab.two_m))
        if p is None:
            continue
        lam = free_eigenvalue(lab.n, k)
        D[i, p] = 1j * lam
        D[p, i] = -1j * lam
    return D


def _mult_nodes(two_j_max: int, L: int) -> int:
    # products Y1 * Y2 * psi are polynomials in cos(theta) of degree <= 2 j_max + L
    return (two_j_max + L) // 2 + 2


def sector_mult_block(sec: Sector, psi: SphereScalar, n_theta: int | None = None) -> np.ndarray:
    """Matrix of multiplication by psi on a sector, by Gauss-Legendre quadrature."""
    L = psi.effective_band_limit(1e-15)
    two_j_max = max(lab.two_j for lab in sec.labels)
    need = _mult_nodes(two_j_max, L)
    if n_theta is None:
        n_theta = need
    elif n_theta < need:
        raise GridError(f"{n_theta} colatitude nodes cannot integrate degree {two_j_max + L} products; need {need}")
    x, w = leggauss(n_theta)
    theta = np.arccos(x)
    profiles = psi.fourier_profiles(x)

    # harmonic profiles grouped by (two_m, two_w)
    groups: dict[tuple, list[int]] = {}
    for i, lab in enumerate(sec.labels):
        groups.setdefault((lab.two_m, lab.two_w), []).append(i)
    rows = {}
    for (two_m, two_w), idx in groups.items():
        jmax = max(sec.labels[i].two_j for i in idx)
        d = wigner_d_rows(two_m, -two_w, jmax, theta)
        two_j_lo = max(abs(two_m), abs(two_w))
        Y = np.empty((len(idx), n_theta))
        for r, i in enumerate(idx):
            tj = sec.labels[i].two_j
            Y[r] = math.sqrt((tj + 1) / (4.0 * math.pi)) * d[(tj - two_j_lo) // 2]
        rows[(two_m, two_w)] = (idx, Y)

    M = np.zeros((sec.size, sec.size), dtype=complex)
    keys = sorted(rows)
    for a in keys:
        ia, Ya = rows[a]
        for b in keys:
            if a[1] != b[1]:
                continue  # different chirality
            mu = (a[0] - b[0]) // 2
            prof = profiles.get(mu)
            if prof is None:
                continue
            ib, Yb = rows[b]
            M[np.ix_(ia, ib)] = 2.0 * math.pi * (Ya * (w * prof)) @ Yb.T
    return M


# ---------------------------------------------------------------------------
# operators


@dataclass(frozen=True)
class FreeDirac:
    """Free monopole Dirac operator, stored in the chirality basis.

    ``eigenvalues`` lists the closed-form spectrum aligned with the basis
    labels: kernel labels get 0, a (+, n) label gets +lambda_n and its (-, n)
    partner -lambda_n.
    """

    basis: SpinorBasis

    @property
    def k(self) -> int:
        return self.basis.k

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        vals = []
        for lab in self.basis.labels:
            vals.append(0.0 if lab.n == 0 else lab.chirality * free_eigenvalue(lab.n, self.k))
        return np.array(vals)

    @property
    def sigma_v(self) -> np.ndarray:
        return np.diag(self.basis.chirality.astype(float))

    @property
    def kernel_dim(self) -> int:
        return int(np.sum(self.basis.shell == 0))

    def matrix(self) -> np.ndarray:
        B = self.basis
        out = np.zeros((B.dim, B.dim), dtype=complex)
        for sec in build_sectors(B, 0):
            out[np.ix_(sec.index, sec.index)] = sector_free_block(sec, self.k)
        return out


def assemble_free(k: int, n_max: int) -> FreeDirac:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    return FreeDirac(SpinorBasis(k, n_max))


def _scatter(basis: SpinorBasis, sectors: list[Sector], blocks: list[np.ndarray]) -> np.ndarray:
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    for sec, blk in zip(sectors, blocks):
        out[np.ix_(sec.index, sec.index)] = blk
    return out


def assemble_mult(psi: SphereScalar, basis: SpinorBasis, n_theta: int | None = None) -> np.ndarray:
    """Dense matrix of multiplication by psi on the truncated spinor space."""
    sectors = build_sectors(basis, m_modulus(psi))
    return _scatter(basis, sectors, [sector_mult_block(s, psi, n_theta) for s in sectors])


def _restrict(big: Sector, n_max: int) -> tuple[np.ndarray, int]:
    keep = np.array([i for i, lab in enumerate(big.labels) if lab.n <= n_max], dtype=int)
    n_plus = sum(1 for i in keep if big.labels[i].chirality == 1)
    return keep, n_plus


@dataclass(frozen=True)
class CliffordAlpha:
    """Clifford multiplication by alpha = *d psi, per sector.

    Built as -[D, M_psi] sigma_v on a basis enlarged by ``margin`` shells and
    compressed back.
    """

    basis: SpinorBasis
    pot: GaugePotential | None
    margin: int
    sectors: tuple
    blocks: tuple

    def matrix(self) -> np.ndarray:
        return _scatter(self.basis, list(self.sectors), list(self.blocks))

    @cached_property
    def norm(self) -> float:
        return max((np.linalg.norm(b, 2) for b in self.blocks if b.size), default=0.0)

    @cached_property
    def hermiticity_defect(self) -> float:
        return max((np.abs(b - b.conj().T).max() for b in self.blocks if b.size), default=0.0)

    @cached_property
    def anticommutator_defect(self) -> float:
        worst = 0.0
        for sec, b in zip(self.sectors, self.blocks):
            s = sec.chirality
            if b.size:
                worst = max(worst, np.abs(b * s[None, :] + s[:, None] * b).max())
        return worst


def assemble_sigma_alpha(free: FreeDirac, pot: GaugePotential | None, margin: int = 2) -> CliffordAlpha:
    if margin < 1:
        raise ValueError("margin must be >= 1: the commutator needs shells beyond the working basis")
    basis = free.basis
    psi = None if pot is None else pot.psi
    modulus = m_modulus(psi)
    sectors = build_sectors(basis, modulus)
    if psi is None or not np.any(psi.coeffs[1:] != 0):
        return CliffordAlpha(basis, pot, margin, tuple(sectors), tuple(np.zeros((s.size, s.size), complex) for s in sectors))
    big = {s.key: s for s in build_sectors(SpinorBasis(basis.k, basis.n_max + margin), modulus)}
    blocks = []
    for sec in sectors:
        bs = big[sec.key]
        D = sector_free_block(bs, basis.k)
        M = sector_mult_block(bs, psi)
        S = -(D @ M - M @ D) * bs.chirality[None, :]
        keep, _ = _restrict(bs, basis.n_max)
        S = S[np.ix_(keep, keep)]
        blocks.append(0.5 * (S + S.conj().T))
    return CliffordAlpha(basis, pot, margin, tuple(sectors), tuple(blocks))


# ---------------------------------------------------------------------------
# systems


def _fix_phase(V: np.ndarray) -> np.ndarray:
    # largest-magnitude component made real positive (first one on ties)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V) - 1e-12 * np.arange(V.shape[0])[:, None], axis=0)
    ph = V[idx, np.arange(V.shape[1])]
    ph = ph / np.abs(ph)
    return V / ph[None, :]


@dataclass(frozen=True)
class SectorSpectrum:
    values: np.ndarray  # ascending
    vectors: np.ndarray  # columns, sector-local coordinates
    zero: np.ndarray  # bool, structural kernel members


def chiral_eigh(H: np.ndarray, n_plus: int) -> SectorSpectrum:
    """Eigenpairs of a Hermitian matrix that anticommutes with diag(+1.., -1..).

    Writing H = [[0, A^*], [A, 0]], the SVD A = U S V^* gives eigenvalues
    +-s with vectors (v, +-u)/sqrt(2); the |n+ - n-| unmatched singular
    vectors span the exact kernel. Tiny nonzero eigenvalues therefore keep
    full relative accuracy and never mix with the kernel.
    """
    N = H.shape[0]
    n_minus = N - n_plus
    A = H[n_plus:, :n_plus]
    if n_plus == 0 or n_minus == 0:
        vals = np.zeros(N)
        vecs = np.eye(N, dtype=complex)
        return SectorSpectrum(vals, vecs, np.ones(N, dtype=bool))
    U, s, Vh = np.linalg.svd(A, full_matrices=True)
    r = len(s)
    V = Vh.conj().T
    r2 = 1.0 / math.sqrt(2.0)
    pos = np.vstack([V[:, :r], U[:, :r]]) * r2
    neg = np.vstack([V[:, :r], -U[:, :r]]) * r2
    if n_plus > n_minus:
        ker = np.vstack([V[:, r:], np.zeros((n_minus, n_plus - r), complex)])
    else:
        ker = np.vstack([np.zeros((n_plus, n_minus - r), complex), U[:, r:]])
    vals = np.concatenate([-s, np.zeros(ker.shape[1]), s])
    vecs = np.hstack([neg, ker, pos])
    zero = np.concatenate([np.zeros(r, bool), np.ones(ker.shape[1], bool), np.zeros(r, bool)])
    order = np.argsort(vals, kind="stable")
    return SectorSpectrum(vals[order], _fix_phase(vecs[:, order]), zero[order])


@dataclass(frozen=True)
class DiracSystem:
    """H = D - t Sigma_alpha with its sector-wise eigendecomposition."""

    k: int
    t: float
    basis: SpinorBasis
    sectors: tuple
    blocks: tuple
    spectra: tuple

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.sort(np.concatenate([sp.values for sp in self.spectra]))

    @cached_property
    def _order(self):
        vals, owner, local = [], [], []
        for si, sp in enumerate(self.spectra):
            vals.append(sp.values)
            owner.append(np.full(len(sp.values), si))
            local.append(np.arange(len(sp.values)))
        vals = np.concatenate(vals)
        # tie-break by sector then local index for a reproducible order
        order = np.lexsort((np.concatenate(local), np.concatenate(owner), vals))
        return vals[order], np.concatenate(owner)[order], np.concatenate(local)[order]

    @property
    def H(self) -> np.ndarray:
        return _scatter(self.basis, list(self.sectors), list(self.blocks))

    @property
    def eigenvectors(self) -> np.ndarray:
        """Dense eigenvector matrix (columns aligned with ``eigenvalues``)."""
        vals, owner, local = self._order
        out = np.zeros((self.basis.dim, len(vals)), dtype=complex)
        for c, (si, li) in enumerate(zip(owner, local)):
            out[self.sectors[si].index, c] = self.spectra[si].vectors[:, li]
        return out

    @cached_property
    def is_zero(self) -> np.ndarray:
        vals, owner, local = self._order
        return np.array([self.spectra[si].zero[li] for si, li in zip(owner, local)], dtype=bool)

    @property
    def norm(self) -> float:
        return max(np.linalg.norm(b, 2) for b in self.blocks if b.size)

    def kernel_count(self, zero_tol: float = ZERO_TOL) -> int:
        return int(np.sum(np.abs(self.eigenvalues) < zero_tol))

    def symmetry_defect(self) -> float:
        ev = self.eigenvalues
        return float(np.abs(ev + ev[::-1]).max())

    def residual(self) -> float:
        worst = 0.0
        for blk, sp in zip(self.blocks, self.spectra):
            if blk.size:
                r = blk @ sp.vectors - sp.vectors * sp.values[None, :]
                worst = max(worst, np.abs(r).max())
        return worst

    def chirality_defect(self) -> float:
        """max |sigma_v H sigma_v + H| over sectors."""
        worst = 0.0
        for sec, b in zip(self.sectors, self.blocks):
            s = sec.chirality
            worst = max(worst, np.abs(s[:, None] * b * s[None, :] + b).max())
        return worst

    def window(self, lo: float, hi: float):
        return diagonalize_window(self, lo, hi)


@dataclass(frozen=True)
class DiracFamily:
    """The pencil t -> D - t Sigma_alpha at fixed truncation."""

    free: FreeDirac
    sigma: CliffordAlpha

    @property
    def k(self) -> int:
        return self.free.k

    @property
    def basis(self) -> SpinorBasis:
        return self.free.basis

    @cached_property
    def free_blocks(self) -> tuple:
        return tuple(sector_free_block(s, self.k) for s in self.sigma.sectors)

    def at(self, t: float) -> DiracSystem:
        return assemble_system(self.free, self.sigma, t, _family=self)

    def at_sector(self, si: int, t: float) -> SectorSpectrum:
        sec = self.sigma.sectors[si]
        return chiral_eigh(self.free_blocks[si] - t * self.sigma.blocks[si], sec.n_plus)


def assemble_system(free: FreeDirac, sigma: CliffordAlpha, t: float, _family: DiracFamily | None = None) -> DiracSystem:
    if free.basis != sigma.basis:
        raise ValueError("free operator and Clifford term live on different bases")
    fam = _family or DiracFamily(free, sigma)
    blocks, spectra = [], []
    for sec, D, S in zip(sigma.sectors, fam.free_blocks, sigma.blocks):
        H = D - t * S
        try:
            sp = chiral_eigh(H, sec.n_plus)
        except np.linalg.LinAlgError as exc:
            cond = np.linalg.cond(H[sec.n_plus :, : sec.n_plus])
            raise np.linalg.LinAlgError(f"eigensolver failed at k={free.k}, t={t}: sector {sec.key}, cond={cond:.3g}") from exc
        blocks.append(H)
        spectra.append(sp)
    return DiracSystem(free.k, float(t), free.basis, sigma.sectors, tuple(blocks), tuple(spectra))


def build_family(k: int, pot: GaugePotential | None, n_max: int, margin: int = 2) -> DiracFamily:
    free = assemble_free(k, n_max)
    return DiracFamily(free, assemble_sigma_alpha(free, pot, margin))


@dataclass(frozen=True)
class WindowPairs:
    values: np.ndarray
    vectors: np.ndarray
    residual: float


def diagonalize_window(sys: DiracSystem, lo: float, hi: float) -> WindowPairs:
    """Eigenpairs with lo <= lambda <= hi and their max residual."""
    if not lo < hi:
        raise ValueError("window needs lo < hi")
    vals, owner, local = sys._order
    sel = np.nonzero((vals >= lo) & (vals <= hi))[0]
    V = np.zeros((sys.basis.dim, len(sel)), dtype=complex)
    res = 0.0
    for c, i in enumerate(sel):
        si, li = owner[i], local[i]
        sec = sys.sectors[si]
        v = sys.spectra[si].vectors[:, li]
        V[sec.index, c] = v
        res = max(res, float(np.abs(sys.blocks[si] @ v - vals[i] * v).max()))
    return WindowPairs(vals[sel], V, res)


# ---------------------------------------------------------------------------
# truncation convergence


DEFAULT_SCHEDULE = (8, 12, 16, 24, 32, 40, 48, 64, 80, 96)


@dataclass(frozen=True)
class ConvergenceReport:
    k: int
    n_max: int
    converged: bool
    table: tuple = field(default=())  # (n_max, next n_max, max movement)


def _window_movement(a: np.ndarray, b: np.ndarray, lo: float = -1.0, hi: float = 1.0) -> float:
    wa = a[(a >= lo) & (a <= hi)]
    wb = b[(b >= lo) & (b <= hi)]
    if wa.size == 0 and wb.size == 0:
        return 0.0
    if wa.size == 0 or wb.size == 0:
        return math.inf
    d1 = np.abs(wa[:, None] - b[None, :]).min(axis=1).max()
    d2 = np.abs(wb[:, None] - a[None, :]).min(axis=1).max()
    movement = max(d1, d2)
    # a count change inside the window is a real change even if values align
    if wa.size != wb.size:
        inner = 1e-3
        ca = np.sum((a >= lo + inner) & (a <= hi - inner))
        cb = np.sum((b >= lo + inner) & (b <= hi - inner))
        if ca != cb:
            return max(movement, math.inf)
    return float(movement)


def converge(
    k: int,
    pot: GaugePotential | None,
    t_samples,
    tol: float = 1e-8,
    schedule=DEFAULT_SCHEDULE,
    margin: int = 2,
) -> ConvergenceReport:
    """Smallest n_max whose windowed eigenvalues move < tol at the next step."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    t_samples = list(t_samples)
    if not all(math.isfinite(t) for t in t_samples):
        raise ValueError("t samples must be finite")
    schedule = list(schedule)
    table = []
    prev = None
    for n in schedule:
        fam = build_family(k, pot, n, margin)
        cur = [fam.at(t).eigenvalues for t in t_samples]
        if prev is not None:
            move = max(_window_movement(a, b) for a, b in zip(prev[1], cur)) if t_samples else 0.0
            table.append((prev[0], n, move))
            if move < tol:
                return ConvergenceReport(k, prev[0], True, tuple(table))
        prev = (n, cur)
    return ConvergenceReport(k, schedule[-1], False, tuple(table))
