"""Linearization of the zero-mode condition as an eigenvalue problem.

With s = t - k + 1, D = H(k - 1) and A = Sigma_alpha, the doubled-space
operators

    P  = [[2D - 1/2, I], [I, -2D - 1/2]],
    Q0 = [[0, I], [I, 0]],   Q1 = [[2A, 0], [0, -2A]],

satisfy (P - sQ + 1/2)^2 = [4(D - sA)^2 + (s-1)^2] (x) I_2, so solutions of
4 mu^2 + (t-k)^2 = 1/4 with t in [k-1/2, k+1/2] become eigenvalues
lambda of L = U |P|^{-1/2} Q |P|^{-1/2} with 1/lambda in [1/2, 3/2].
Doubled vectors are stored as ``kron(c2, spinor)``, i.e. C^2 index outer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .dirac import DiracFamily, chiral_eigh

J_LO, J_HI = 0.5, 1.5
SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA2 = np.array([[0.0, -1j], [1j, 0.0]])
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]])


class PencilError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# 2 x 2 symbol


def symbol(d: float) -> np.ndarray:
    return np.array([[2 * d - 0.5, 1.0], [1.0, -2 * d - 0.5]])


@dataclass(frozen=True)
class Kappa:
    d: float
    plus: float
    minus: float
    x_plus: np.ndarray
    x_minus: np.ndarray

    @property
    def delta(self) -> float:
        return math.sqrt(4 * self.d * self.d + 1)


def _abs_inv_sqrt(X: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(X)
    return (V * np.abs(w) ** -0.5) @ V.conj().T


def kappa_pm(d: float) -> Kappa:
    """Reciprocals of the two roots of p_d(l) = l^2 + l/Delta + 1/4 - Delta^2."""
    delta = math.sqrt(4 * d * d + 1)
    b, c = 1.0 / delta, 0.25 - delta * delta
    q = -0.5 * (b + math.sqrt(b * b - 4 * c))  # negative root, no cancellation
    chi_minus, chi_plus = q, c / q
    Y = _abs_inv_sqrt(symbol(d))
    w, V = np.linalg.eigh(Y @ SIGMA1 @ Y)
    return Kappa(d, 1.0 / chi_plus, 1.0 / chi_minus, V[:, 1], V[:, 0])


def kappa_direct(d: float) -> tuple[float, float]:
    """(kappa+, kappa-) from an eigensolve of |X_d|^{-1/2} sigma_1 |X_d|^{-1/2}."""
    Y = _abs_inv_sqrt(symbol(d))
    w = np.linalg.eigvalsh(Y @ SIGMA1 @ Y)
    return float(w[1]), float(w[0])


def kappa_bounds_violations(d: float, kp: Kappa | None = None) -> list[str]:
    kp = kp or kappa_pm(d)
    out = []
    cap = 2.0 if d == 0 else min(2.0, 1.0 / abs(d))
    tol = 1e-12
    if kp.plus > cap + tol:
        out.append(f"kappa+({d}) = {kp.plus} exceeds {cap}")
    if -kp.minus > cap + tol:
        out.append(f"-kappa-({d}) = {-kp.minus} exceeds {cap}")
    if abs(kp.plus - 2.0) > 16 * d * d + tol:
        out.append(f"|kappa+({d}) - 2| exceeds 16 d^2")
    if abs(kp.minus + 2.0 / 3.0) > 16 * d * d + tol:
        out.append(f"|kappa-({d}) + 2/3| exceeds 16 d^2")
    return out


# ---------------------------------------------------------------------------
# block operators


def _kron2(m2: np.ndarray, X: np.ndarray) -> np.ndarray:
    return np.kron(m2, X)


@dataclass
class PencilSystem:
    k: int
    family: DiracFamily
    D: np.ndarray
    A: np.ndarray
    P: np.ndarray
    Q0: np.ndarray
    Q1: np.ndarray
    P_eigenvalues: np.ndarray
    P_inv_half: np.ndarray
    U: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def Q(self) -> np.ndarray:
        return self.Q0 + self.Q1

    @cached_property
    def K0(self) -> np.ndarray:
        return self.P_inv_half @ self.Q0 @ self.P_inv_half

    @cached_property
    def K1(self) -> np.ndarray:
        return self.P_inv_half @ self.Q1 @ self.P_inv_half

    @property
    def K(self) -> np.ndarray:
        return self.K0 + self.K1

    @cached_property
    def L(self) -> np.ndarray:
        return self.U @ self.K

    @cached_property
    def L_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.L)

    @cached_property
    def K_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.K + self.K.conj().T))

    def psq2_residual(self, s: float) -> float:
        n = self.D.shape[0]
        I2 = np.eye(2 * n)
        lhs = self.P - s * self.Q + 0.5 * I2
        H = self.D - s * self.A
        rhs = _kron2(np.eye(2), 4 * H @ H + (s - 1) ** 2 * np.eye(n))
        return float(np.abs(lhs @ lhs - rhs).max())

    def sigma2_residual(self, s: float) -> float:
        n = self.D.shape[0]
        S2 = _kron2(SIGMA2, np.eye(n))
        X = self.P - s * self.Q
        return float(np.abs(S2 @ X @ S2 + X + np.eye(2 * n)).max())

    def kernel_dims(self, s: float, rank_tol: float = 1e-9) -> tuple[int, int]:
        """(dim Ker(I - sL), dim Ker(P - sQ)) from singular values."""
        n2 = self.P.shape[0]
        a = np.linalg.svd(np.eye(n2) - s * self.L, compute_uv=False)
        b = np.linalg.svd(self.P - s * self.Q, compute_uv=False)
        return int(np.sum(a < rank_tol * max(1.0, a.max()))), int(np.sum(b < rank_tol * max(1.0, b.max())))


def build_pencil(family: DiracFamily, floor_tol: float = 1e-9) -> PencilSystem:
    """Assemble P, Q0, Q1 and the polar pieces of P at t = k - 1."""
    k = family.k
    D = family.at(k - 1).H
    A = family.sigma.matrix()
    n = D.shape[0]
    I = np.eye(n)
    P = _kron2(SIGMA3, 2 * D) + _kron2(SIGMA1, I) - 0.5 * np.eye(2 * n)
    P = 0.5 * (P + P.conj().T)
    Q0 = _kron2(SIGMA1, I).astype(complex)
    Q1 = _kron2(SIGMA3, 2 * A)
    w, V = np.linalg.eigh(P)
    if np.abs(w).min() < 0.5 - floor_tol:
        raise PencilError(f"|P| has eigenvalue {np.abs(w).min():.12g} below 1/2: truncation is inconsistent")
    P_inv_half = (V * np.abs(w) ** -0.5) @ V.conj().T
    U = (V * np.sign(w)) @ V.conj().T
    sys = PencilSystem(k, family, D, A, P, Q0, Q1, w, P_inv_half, U)
    sys.diagnostics = {
        "psq2": max(sys.psq2_residual(s) for s in (0.0, 0.5, 1.0)),
        "sigma2": max(sys.sigma2_residual(s) for s in (0.0, 1.0, 1.37)),
        "inv_half_norm": float(np.abs(w).min() ** -0.5),
    }
    return sys


# ---------------------------------------------------------------------------
# counting


@dataclass(frozen=True)
class PencilCount:
    k: int
    N: int
    raw: int
    boundary: tuple  # eigenvalues within boundary_tol of 2 or 2/3
    nonreal: tuple  # window eigenvalues with imaginary part beyond window_tol


def _in_interval(x: float, lo: float, hi: float, tol: float) -> bool:
    return lo - tol <= x <= hi + tol


def pencil_count(
    sys: PencilSystem,
    boundary_tol: float = 1e-8,
    window_tol: float | None = None,
    interval: tuple = (J_LO, J_HI),
) -> PencilCount:
    """Half the number of eigenvalues of L whose reciprocals lie in ``interval``."""
    ev = sys.L_eigenvalues
    if window_tol is None:
        window_tol = 1e-8 * np.linalg.norm(sys.L, 2)
    lo, hi = interval
    raw, boundary, nonreal = 0, [], []
    for lam in ev:
        if abs(lam) < 1e-14:
            continue
        inv = 1.0 / lam.real
        inside = _in_interval(inv, lo, hi, boundary_tol)
        if not inside:
            continue
        if abs(lam.imag) > window_tol:
            nonreal.append(complex(lam))
            continue
        raw += 1
        if min(abs(inv - lo), abs(inv - hi)) <= boundary_tol:
            boundary.append(float(lam.real))
    if raw % 2:
        raise PencilError(f"odd window count {raw} at k={sys.k}; boundary eigenvalues {boundary}, non-real {nonreal}")
    return PencilCount(sys.k, raw // 2, raw, tuple(boundary), tuple(nonreal))


def count_reciprocals(sys: PencilSystem, lo: float, hi: float, tol: float = 1e-8) -> int:
    ev = sys.L_eigenvalues
    window_tol = 1e-8 * np.linalg.norm(sys.L, 2)
    return int(
        sum(1 for lam in ev if abs(lam) > 1e-14 and abs(lam.imag) <= window_tol and _in_interval(1.0 / lam.real, lo, hi, tol))
    )


# ---------------------------------------------------------------------------
# audit


@dataclass(frozen=True)
class AuditRow:
    name: str
    lhs: float
    rhs: float
    precondition: bool = True
    note: str = ""

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.margin >= 0


@dataclass(frozen=True)
class Constants:
    a: float
    sup: float

    @property
    def C1(self) -> float:
        return 4 * math.exp(self.a / 2)

    @property
    def C21(self) -> float:
        return 16 * math.exp(2 * self.a)

    @property
    def C22(self) -> float:
        return math.exp(self.a)

    @property
    def C31(self) -> float:
        return 4 * self.a * math.exp(self.a)

    @property
    def C32(self) -> float:
        return 2 * math.sqrt(2) * math.exp(self.a / 2) * self.sup

    def delta(self, eps: float, R: float, n_eps: int) -> float:
        return self.C21 * eps**2 + 4 * self.C31 * eps * n_eps + self.C22 / R + 2 * self.C32 / math.sqrt(R)


@dataclass(frozen=True)
class ModeData:
    """Eigenbasis of D = H(k-1) with the values of the same branches at t = k."""

    xi: np.ndarray
    nu: np.ndarray
    mu_k: np.ndarray


def mode_data(family: DiracFamily) -> ModeData:
    k = family.k
    basis = family.basis
    cols, nus, mus = [], [], []
    for si, sec in enumerate(family.sigma.sectors):
        D, S = family.free_blocks[si], family.sigma.blocks[si]
        before = chiral_eigh(D - (k - 1) * S, sec.n_plus)
        after = chiral_eigh(D - k * S, sec.n_plus)
        for c in range(sec.size):
            v = np.zeros(basis.dim, dtype=complex)
            v[sec.index] = before.vectors[:, c]
            cols.append(v)
            nus.append(before.values[c])
            mus.append(after.values[c])
    return ModeData(np.array(cols).T, np.array(nus), np.array(mus))


def _proj(vectors: list) -> np.ndarray:
    if not vectors:
        return None
    V = np.array(vectors).T
    return V @ V.conj().T


def _norm(X) -> float:
    return 0.0 if X is None else float(np.linalg.norm(X, 2))


def pencil_audit(sys: PencilSystem, eps: float, R: float, sup: float, N_direct: int | None = None) -> list:
    """Evaluate both sides of the singular-value estimates on the finite section."""
    consts = Constants(2 * math.pi * sup, sup)
    md = mode_data(sys.family)
    n_eps = int(np.sum(np.abs(md.mu_k) <= eps))
    d = int(np.sum(np.abs(md.mu_k) <= R)) - n_eps if R >= eps else 0
    delta = consts.delta(eps, R, n_eps)
    eps_ok = eps <= 1.0 / consts.C1

    up = {"+": [], "-": []}
    u_far = []
    K0 = sys.K0
    k0_resid = 0.0
    for j in range(md.xi.shape[1]):
        kp = kappa_pm(md.nu[j])
        for tag, x, kv in (("+", kp.x_plus, kp.plus), ("-", kp.x_minus, kp.minus)):
            u = np.kron(x, md.xi[:, j])
            k0_resid = max(k0_resid, float(np.abs(K0 @ u - kv * u).max()))
            if abs(md.mu_k[j]) <= eps:
                up[tag].append(u)
            elif abs(md.mu_k[j]) > R:
                u_far.append(u)
    Pp, Pm, Pfar = _proj(up["+"]), _proj(up["-"]), _proj(u_far)
    I2 = np.eye(K0.shape[0])
    rows = []

    # K0 bound on the approximate-zero-mode and far subspaces
    for tag, Pr, k0 in (("+", Pp, 2.0), ("-", Pm, -2.0 / 3.0)):
        lhs = _norm(None if Pr is None else (K0 - k0 * I2) @ Pr)
        rows.append(AuditRow(f"K0_eps{tag}", lhs, consts.C21 * eps**2))
        if Pr is not None:
            sgn = 1 if tag == "+" else -1
            m = np.linalg.eigvalsh(sgn * Pr @ K0 @ Pr)
            rows.append(AuditRow(f"K0_sign{tag}", -m.min(), 1e-12, note="sign definiteness of K0 on the range"))
    rows.append(AuditRow("K0_far", _norm(None if Pfar is None else K0 @ Pfar), consts.C22 / R))

    # K1 bound between approximate-zero-mode subspaces and on the far subspace
    K1 = sys.K1
    for a_tag, Pa in (("+", Pp), ("-", Pm)):
        for b_tag, Pb in (("+", Pp), ("-", Pm)):
            lhs = 0.0 if Pa is None or Pb is None else _norm(Pa @ K1 @ Pb)
            rows.append(AuditRow(f"K1_eps{a_tag}{b_tag}", lhs, consts.C31 * eps * n_eps))
    rows.append(AuditRow("K1_far", _norm(None if Pfar is None else K1 @ Pfar), consts.C32 / math.sqrt(R)))

    # counts of K eigenvalues outside the kappa(0) and delta thresholds
    kev = sys.K_eigenvalues
    pos, neg = kev[kev > 0], -kev[kev < 0]
    rows.append(AuditRow("K_count_outer+", float(np.sum(pos > 2.0 + delta)), 2.0 * d))
    rows.append(AuditRow("K_count_outer-", float(np.sum(neg > 2.0 / 3.0 + delta)), 2.0 * d))
    rows.append(AuditRow("K_count_inner+", float(np.sum(pos > delta)), float(n_eps + 2 * d)))
    rows.append(AuditRow("K_count_inner-", float(np.sum(neg > delta)), float(n_eps + 2 * d)))

    # norm of K
    normK = float(np.abs(kev).max())
    rows.append(AuditRow("K_norm", normK, 2.0 * math.sqrt(1.0 + 4.0 * sup * sup)))

    # Weyl inequality between window eigenvalues of L and singular values of L
    ev = sys.L_eigenvalues
    wtol = 1e-8 * np.linalg.norm(sys.L, 2)
    lam = np.array([z.real for z in ev if abs(z) > 1e-14 and abs(z.imag) <= wtol and _in_interval(1 / z.real, J_LO, J_HI, 1e-8)])
    svals = np.sort(np.abs(kev))[::-1]
    rows.append(AuditRow("weyl", float(lam.sum()), float(svals[: len(lam)].sum())))

    # approximate zero modes seen by L
    C1 = consts.C1
    gp, gm = 1 + (1 - C1 * eps) / 2, 1 - (1 - C1 * eps) / 2
    cp = count_reciprocals(sys, max(gp, J_LO), J_HI)
    cm = count_reciprocals(sys, J_LO, min(gm, J_HI))
    rows.append(AuditRow("azm_window+", float(n_eps), float(cp), eps_ok, "needs eps <= 1/C1"))
    rows.append(AuditRow("azm_window-", float(n_eps), float(cm), eps_ok, "needs eps <= 1/C1"))

    # final estimate for N - n_eps
    N = N_direct if N_direct is not None else len(lam) // 2
    lhs = (2.0 / 3.0 - delta) * (N - n_eps)
    rhs = (delta + C1 * eps) * n_eps + 2 * normK * d
    rows.append(AuditRow("N_minus_neps", lhs, rhs, eps_ok, "needs eps <= 1/C1"))
    rows.append(AuditRow("K0_eigenbasis", k0_resid, 1e-9, note="residual of K0 u = kappa u"))
    return rows
