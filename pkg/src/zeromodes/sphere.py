"""Band-limited scalar and 1-form calculus on the unit 2-sphere.

Functions are stored as complex coefficients of orthonormal spherical
harmonics with the Condon-Shortley phase,

    Y_lm(theta, phi) = sqrt((2l+1)/4pi) d^l_{m,0}(theta) exp(i m phi),

so that the Laplace-Beltrami operator is diagonal with eigenvalue -l(l+1).
Integrals use Gauss-Legendre nodes in cos(theta) and a uniform longitude
grid.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .kernels import wigner_d_rows

FOUR_PI = 4.0 * math.pi


class GridError(ValueError):
    """Quadrature grid too small for the requested band limit."""


class FluxError(ValueError):
    """Total flux incompatible with the requested spin-c bundle."""


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureGrid:
    """Gauss-Legendre (in cos theta) x uniform-longitude product grid."""

    n_theta: int
    n_phi: int
    cos_theta: np.ndarray = field(repr=False, compare=False)
    theta_weights: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def gauss(cls, n_theta: int, n_phi: int) -> "QuadratureGrid":
        if n_theta < 1 or n_phi < 1:
            raise GridError("grid needs at least one node in each direction")
        x, w = leggauss(n_theta)
        # north pole first
        return cls(n_theta, n_phi, x[::-1].copy(), w[::-1].copy())

    @classmethod
    def for_band_limit(cls, L: int, oversample: int = 1) -> "QuadratureGrid":
        """Smallest grid exact for products of two degree-``L`` functions."""
        return cls.gauss(oversample * (L + 1), oversample * (2 * L + 1))

    @property
    def theta(self) -> np.ndarray:
        return np.arccos(self.cos_theta)

    @property
    def phi(self) -> np.ndarray:
        return 2.0 * math.pi * np.arange(self.n_phi) / self.n_phi

    @property
    def weights(self) -> np.ndarray:
        """Node weights, shape ``(n_theta, n_phi)``; they sum to 4 pi."""
        return np.outer(self.theta_weights, np.full(self.n_phi, 2.0 * math.pi / self.n_phi))

    @property
    def points(self) -> np.ndarray:
        """Node positions as unit vectors, shape ``(n_theta, n_phi, 3)``."""
        st = np.sqrt(np.clip(1.0 - self.cos_theta**2, 0.0, None))
        ph = self.phi
        return np.stack(
            [
                np.outer(st, np.cos(ph)),
                np.outer(st, np.sin(ph)),
                np.outer(self.cos_theta, np.ones(self.n_phi)),
            ],
            axis=-1,
        )

    def supports(self, L: int) -> bool:
        return self.n_theta >= L + 1 and self.n_phi >= 2 * L + 1

    def require(self, L: int) -> None:
        if not self.supports(L):
            raise GridError(
                f"grid {self.n_theta}x{self.n_phi} cannot resolve band limit {L}: "
                f"need n_theta >= {L + 1} and n_phi >= {2 * L + 1}"
            )


@lru_cache(maxsize=256)
def _harmonic_table(L: int, two_s: int, cos_key: bytes, n: int) -> np.ndarray:
    # table[l, m + L, i] = sqrt((2l+1)/4pi) d^l_{m,-s}(theta_i)
    theta = np.arccos(np.frombuffer(cos_key, dtype=float, count=n))
    table = np.zeros((L + 1, 2 * L + 1, n))
    for m in range(-L, L + 1):
        rows = wigner_d_rows(2 * m, -two_s, 2 * L, theta)
        l0 = max(abs(m), abs(two_s) // 2)
        for i, l in enumerate(range(l0, L + 1)):
            table[l, m + L] = math.sqrt((2 * l + 1) / FOUR_PI) * rows[i]
    table.setflags(write=False)
    return table


def harmonic_table(L: int, cos_theta: np.ndarray, spin: int = 0) -> np.ndarray:
    """Spin-weighted harmonic profiles on the given colatitude nodes."""
    c = np.ascontiguousarray(cos_theta, dtype=float)
    return _harmonic_table(L, 2 * spin, c.tobytes(), c.size)


# ---------------------------------------------------------------------------
# scalars


@dataclass(frozen=True)
class SphereScalar:
    """Real band-limited function stored as harmonic coefficients.

    ``coeffs[l, m + L]`` holds f_{l,m}; entries with |m| > l are zero.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[1] != 2 * c.shape[0] - 1:
            raise ValueError("coefficient array must have shape (L+1, 2L+1)")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction -----------------------------------------------------------
    @classmethod
    def zeros(cls, L: int) -> "SphereScalar":
        return cls(np.zeros((L + 1, 2 * L + 1), dtype=complex))

    @classmethod
    def from_dict(cls, terms: dict, L: int | None = None) -> "SphereScalar":
        """Build from ``{(l, m): f_lm}``; missing reality partners are filled in."""
        if L is None:
            L = max((l for l, _ in terms), default=0)
        c = np.zeros((L + 1, 2 * L + 1), dtype=complex)
        for (l, m), v in terms.items():
            if abs(m) > l or l > L:
                raise ValueError(f"invalid harmonic index ({l}, {m})")
            c[l, m + L] = v
        for (l, m), v in terms.items():
            if m != 0 and (l, -m) not in terms:
                c[l, -m + L] = (-1) ** m * np.conj(v)
        return cls(c)

    @classmethod
    def constant(cls, value: float, L: int = 0) -> "SphereScalar":
        return cls.from_dict({(0, 0): value * math.sqrt(FOUR_PI)}, L)

    @classmethod
    def real_harmonic(cls, l: int, m: int, amplitude: float = 1.0, L: int | None = None) -> "SphereScalar":
        """Unit-normalized real harmonic (cos for m > 0, sin for m < 0)."""
        L = l if L is None else L
        if m == 0:
            return cls.from_dict({(l, 0): amplitude}, L)
        mm = abs(m)
        if m > 0:
            a = amplitude * (-1) ** mm / math.sqrt(2.0)
            return cls.from_dict({(l, mm): a, (l, -mm): amplitude / math.sqrt(2.0)}, L)
        a = amplitude * (-1) ** mm / (1j * math.sqrt(2.0))
        return cls.from_dict({(l, mm): a, (l, -mm): -amplitude / (1j * math.sqrt(2.0))}, L)

    @classmethod
    def coordinate(cls, axis: int, scale: float = 1.0, L: int = 1) -> "SphereScalar":
        """The Cartesian coordinate x_axis (axis in 1..3) restricted to the sphere."""
        r = math.sqrt(FOUR_PI / 3.0) * scale
        if axis == 3:
            return cls.from_dict({(1, 0): r}, L)
        if axis == 1:
            return cls.from_dict({(1, -1): r / math.sqrt(2.0), (1, 1): -r / math.sqrt(2.0)}, L)
        if axis == 2:
            return cls.from_dict({(1, -1): 1j * r / math.sqrt(2.0), (1, 1): 1j * r / math.sqrt(2.0)}, L)
        raise ValueError("axis must be 1, 2 or 3")

    @classmethod
    def random(cls, L: int, rng: np.random.Generator, zero_mean: bool = False) -> "SphereScalar":
        terms = {}
        for l in range(L + 1):
            terms[(l, 0)] = rng.normal()
            for m in range(1, l + 1):
                terms[(l, m)] = complex(rng.normal(), rng.normal()) / math.sqrt(2.0)
        if zero_mean:
            terms[(0, 0)] = 0.0
        return cls.from_dict(terms, L)

    # properties -------------------------------------------------------------
    @property
    def L(self) -> int:
        return self.coeffs.shape[0] - 1

    def __getitem__(self, lm):
        l, m = lm
        if l > self.L or abs(m) > l:
            return 0.0j
        return self.coeffs[l, m + self.L]

    def effective_band_limit(self, tol: float = 0.0) -> int:
        nz = np.nonzero(np.abs(self.coeffs) > tol)[0]
        return int(nz.max()) if nz.size else 0

    def m_support(self, tol: float = 0.0) -> list[int]:
        cols = np.nonzero(np.any(np.abs(self.coeffs) > tol, axis=0))[0]
        return sorted(int(c) - self.L for c in cols)

    def is_axisymmetric(self, tol: float = 0.0) -> bool:
        return all(m == 0 for m in self.m_support(tol))

    def reality_defect(self) -> float:
        L = self.L
        worst = 0.0
        for l in range(L + 1):
            for m in range(-l, l + 1):
                d = abs(self.coeffs[l, m + L] - (-1) ** m * np.conj(self.coeffs[l, -m + L]))
                worst = max(worst, d)
        return worst

    def mean(self) -> float:
        return float(self.coeffs[0, self.L].real / math.sqrt(FOUR_PI))

    def content_hash(self) -> str:
        L = self.effective_band_limit(1e-15)
        c = np.round(self.resized(L).coeffs, 13) + 0.0
        return hashlib.sha256(c.tobytes()).hexdigest()[:16]

    # algebra ----------------------------------------------------------------
    def resized(self, L: int) -> "SphereScalar":
        out = np.zeros((L + 1, 2 * L + 1), dtype=complex)
        n = min(L, self.L)
        out[: n + 1, L - n : L + n + 1] = self.coeffs[: n + 1, self.L - n : self.L + n + 1]
        return SphereScalar(out)

    def __add__(self, other: "SphereScalar") -> "SphereScalar":
        L = max(self.L, other.L)
        return SphereScalar(self.resized(L).coeffs + other.resized(L).coeffs)

    def __sub__(self, other: "SphereScalar") -> "SphereScalar":
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> "SphereScalar":
        return SphereScalar(self.coeffs * scalar)

    __rmul__ = __mul__

    def laplacian(self) -> "SphereScalar":
        ell = np.arange(self.L + 1)[:, None]
        return SphereScalar(-ell * (ell + 1) * self.coeffs)

    def inverse_laplacian(self) -> "SphereScalar":
        """Zero-mean solution of Lap(u) = self - mean(self)."""
        ell = np.arange(self.L + 1)[:, None].astype(float)
        div = -ell * (ell + 1)
        div[0] = 1.0
        c = self.coeffs / div
        c[0] = 0.0
        return SphereScalar(c)

    # evaluation -------------------------------------------------------------
    def fourier_profiles(self, cos_theta: np.ndarray, spin: int = 0, weights=None) -> dict:
        """``{m: F_m(theta)}`` with f = sum_m F_m(theta) exp(i m phi).

        With ``spin = 1`` and ``weights = sqrt(l(l+1))`` this gives the
        complex gradient field (see :func:`gradient_field`).
        """
        L = self.L
        table = harmonic_table(L, cos_theta, spin)
        c = self.coeffs if weights is None else self.coeffs * weights[:, None]
        out = {}
        for m in range(-L, L + 1):
            col = c[:, m + L]
            if np.any(col != 0):
                out[m] = col @ table[:, m + L, :]
        return out

    def _synth(self, grid: QuadratureGrid, spin: int = 0, weights=None) -> np.ndarray:
        prof = self.fourier_profiles(grid.cos_theta, spin, weights)
        phi = grid.phi
        out = np.zeros((grid.n_theta, grid.n_phi), dtype=complex)
        for m, F in prof.items():
            out += np.outer(F, np.exp(1j * m * phi))
        return out

    def synthesize(self, grid: QuadratureGrid) -> np.ndarray:
        """Values on the grid nodes, shape ``(n_theta, n_phi)``."""
        return self._synth(grid).real

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Values at arbitrary unit vectors ``points[..., 3]``."""
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 3)
        ct = np.clip(flat[:, 2], -1.0, 1.0)
        ph = np.arctan2(flat[:, 1], flat[:, 0])
        prof = self.fourier_profiles(ct)
        val = np.zeros(flat.shape[0], dtype=complex)
        for m, F in prof.items():
            val += F * np.exp(1j * m * ph)
        return val.real.reshape(pts.shape[:-1])

    def gradient_field(self, grid: QuadratureGrid) -> np.ndarray:
        """Complex field G = df(e_theta) + i df(e_phi) on the grid nodes.

        ``|G|`` is the pointwise norm of df. The Hodge star acts as
        multiplication by i on this representation.
        """
        ell = np.arange(self.L + 1).astype(float)
        return self._synth(grid, spin=1, weights=np.sqrt(ell * (ell + 1)))


def sh_synthesize(f: SphereScalar, grid: QuadratureGrid) -> np.ndarray:
    return f.synthesize(grid)


def sh_analyze(samples: np.ndarray, grid: QuadratureGrid, L: int) -> SphereScalar:
    """Quadrature projection of grid samples onto harmonics of degree <= L."""
    grid.require(L)
    samples = np.asarray(samples)
    if samples.shape != (grid.n_theta, grid.n_phi):
        raise ValueError(f"samples shape {samples.shape} does not match grid")
    if np.iscomplexobj(samples) and np.abs(samples.imag).max() > 0:
        raise ValueError("samples must be real-valued")
    G = np.fft.fft(np.real(samples), axis=1) * (2.0 * math.pi / grid.n_phi)
    table = harmonic_table(L, grid.cos_theta)
    c = np.zeros((L + 1, 2 * L + 1), dtype=complex)
    for m in range(-L, L + 1):
        Gm = G[:, m % grid.n_phi]
        c[:, m + L] = table[:, m + L, :] @ (grid.theta_weights * Gm)
    # clear |m| > l slots touched by rounding
    for l in range(L + 1):
        c[l, : L - l] = 0.0
        c[l, L + l + 1 :] = 0.0
    return SphereScalar(c)


def integrate(samples: np.ndarray, grid: QuadratureGrid) -> float:
    return float(np.sum(grid.weights * samples))


# ---------------------------------------------------------------------------
# fluxes


def flux(beta: SphereScalar) -> float:
    """(1/2pi) times the integral of f, read off the l = 0 coefficient."""
    return float(beta[0, 0].real * math.sqrt(FOUR_PI) / (2.0 * math.pi))


def default_abs_grid(f: SphereScalar) -> QuadratureGrid:
    # |f| has kinks; accuracy comes from node count, not exactness
    L = f.effective_band_limit(1e-15)
    n_phi = 1 if f.is_axisymmetric(1e-15) else max(512, 8 * (2 * L + 1))
    return QuadratureGrid.gauss(2048, n_phi)


def abs_flux(beta: SphereScalar, grid: QuadratureGrid | None = None) -> float:
    """(1/2pi) times the integral of |f| by quadrature."""
    grid = default_abs_grid(beta) if grid is None else grid
    vals = beta.synthesize(grid)
    return float(np.sum(grid.weights * np.abs(vals)) / (2.0 * math.pi))


# ---------------------------------------------------------------------------
# gauge potentials


@dataclass(frozen=True)
class GaugePotential:
    """Scalar potential psi with alpha = *d psi and d alpha = beta - (k/2) v.

    ``sup_norm`` is the safe (inflated) estimate of ||alpha||_inf used in
    every bound; ``raw_sup`` is the plain grid maximum.
    """

    psi: SphereScalar
    k: int
    raw_sup: float
    sup_norm: float
    grid_nodes: int

    @property
    def a(self) -> float:
        return 2.0 * math.pi * self.sup_norm

    def scaled(self, factor: float) -> "GaugePotential":
        return GaugePotential(
            self.psi * factor, self.k, abs(factor) * self.raw_sup, abs(factor) * self.sup_norm, self.grid_nodes
        )


def _sup_grid(L: int, refine: int) -> QuadratureGrid:
    base = max(2 * (L + 1) + 1, 33)
    n = base * refine
    if n % 2 == 0:
        n += 1  # odd count puts a node on the equator
    return QuadratureGrid.gauss(n, max(2 * (2 * L + 1), 16) * refine)


def gradient_sup(psi: SphereScalar, refine: int = 4) -> tuple[float, int]:
    """Max of |d psi| over the union of the oversampled grids 1..refine."""
    if refine < 1:
        raise ValueError("refine must be >= 1")
    if not np.any(psi.coeffs[1:] != 0):
        return 0.0, 0
    L = psi.L
    best, nodes = 0.0, 0
    for r in range(1, refine + 1):
        g = _sup_grid(L, r)
        best = max(best, float(np.abs(psi.gradient_field(g)).max()))
        nodes = g.n_theta
    return best, nodes


def sup_norm_oneform(pot: GaugePotential | SphereScalar, refine: int = 4) -> float:
    """Safe upper estimate of ||*d psi||_inf: grid max times (1 + 10/n_theta)."""
    psi = pot.psi if isinstance(pot, GaugePotential) else pot
    raw, n = gradient_sup(psi, refine)
    if raw == 0.0:
        return 0.0
    return raw * (1.0 + 10.0 / n)


def hodge_gauge(beta: SphereScalar, k: int, refine: int = 4, flux_tol: float = 1e-9) -> GaugePotential:
    """Solve for psi with d(*d psi) = beta - (k/2) v.

    Raises :class:`FluxError` unless the flux of beta equals k: only then is
    beta the magnetic 2-form of a spin-c connection on the bundle of index k.
    """
    phi_b = flux(beta)
    if abs(phi_b - k) > flux_tol:
        raise FluxError(
            f"flux of beta is {phi_b:.12g} but bundle index is {k}; the magnetic 2-form of a "
            f"spin-c connection on Psi_k must have total flux k"
        )
    # d(*d psi) = (Lap psi) v, and the mean of beta - (k/2) v vanishes
    psi = beta.inverse_laplacian()
    raw, n = gradient_sup(psi, refine)
    safe = raw * (1.0 + 10.0 / n) if raw else 0.0
    return GaugePotential(psi, k, raw, safe, n)


def curl_residual(pot: GaugePotential, beta: SphereScalar, grid: QuadratureGrid) -> float:
    """Max over nodes of |d alpha - (beta - (k/2) v)| with d alpha from psi."""
    dalpha = pot.psi.laplacian().synthesize(grid)
    target = beta.synthesize(grid) - 0.5 * pot.k
    return float(np.abs(dalpha - target).max())


# ---------------------------------------------------------------------------
# integral identities


@dataclass(frozen=True)
class OneFormPair:
    """omega = d phi + * d psi for zero-mean potentials."""

    phi: SphereScalar
    psi: SphereScalar

    def __post_init__(self):
        for name in ("phi", "psi"):
            if abs(getattr(self, name)[0, 0]) > 1e-14:
                raise ValueError(f"{name} must have zero mean")

    @classmethod
    def random(cls, L: int, rng: np.random.Generator) -> "OneFormPair":
        return cls(SphereScalar.random(L, rng, zero_mean=True), SphereScalar.random(L, rng, zero_mean=True))

    def field(self, grid: QuadratureGrid) -> np.ndarray:
        # * rotates (e_theta, e_phi) components by +90 degrees
        return self.phi.gradient_field(grid) + 1j * self.psi.gradient_field(grid)


@dataclass(frozen=True)
class IdentityReport:
    l1_norm: float
    codiff_l1: float
    curl_l1: float
    l1_ratio: float
    kernel_points: np.ndarray
    kernel_values: np.ndarray
    kernel_star_values: np.ndarray
    kernel_reference: float
    squared_norm_reading: float
    green_error: float
    notes: tuple = ()

    @property
    def kernel_rel_error(self) -> float:
        vals = np.concatenate([self.kernel_values, self.kernel_star_values])
        return float(np.abs(vals / self.kernel_reference - 1.0).max())

    def rows(self) -> list[dict]:
        out = [
            {"identity": "l1_ratio", "value": self.l1_ratio, "reference": 1.0, "ok": self.l1_ratio <= 1.0 + 1e-6},
            {"identity": "green_error", "value": self.green_error, "reference": 0.0, "ok": self.green_error < 1e-4},
        ]
        for i, (v, s) in enumerate(zip(self.kernel_values, self.kernel_star_values)):
            for name, val in (("kernel", v), ("kernel_star", s)):
                out.append(
                    {
                        "identity": f"{name}[{i}]",
                        "value": val,
                        "reference": self.kernel_reference,
                        "ok": abs(val / self.kernel_reference - 1.0) < 1e-3,
                    }
                )
        return out


def _frame(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    y = y / np.linalg.norm(y)
    trial = np.array([1.0, 0.0, 0.0]) if abs(y[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = trial - y * (trial @ y)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(y, e1)
    return np.stack([e1, e2, y])


def kernel_integral(y: np.ndarray, n_angle: int = 64, n_azimuth: int = 16) -> tuple[float, float]:
    """Integrals of |d(x.y)| / (1 - x.y) and of its Hodge dual over the sphere.

    Polar coordinates centred on y; the Jacobian sin(theta') cancels the
    singularity so the profile is bounded and Gauss-Legendre in theta'
    converges spectrally.
    """
    R = _frame(y)
    x, w = leggauss(n_angle)
    th = 0.5 * math.pi * (x + 1.0)
    wt = 0.5 * math.pi * w
    ph = 2.0 * math.pi * np.arange(n_azimuth) / n_azimuth
    st, ct = np.sin(th), np.cos(th)
    local = np.stack(
        [np.outer(st, np.cos(ph)), np.outer(st, np.sin(ph)), np.outer(ct, np.ones_like(ph))], axis=-1
    )
    pts = local @ R
    yv = R[2]
    xy = pts @ yv
    tangential = yv - xy[..., None] * pts
    star = np.cross(pts, tangential)
    # sin(theta') / (1 - cos(theta')) = cot(theta'/2), finite on the GL nodes
    jac = 1.0 / np.tan(0.5 * th)
    wts = np.outer(wt, np.full(n_azimuth, 2.0 * math.pi / n_azimuth))
    i1 = float(np.sum(wts * np.linalg.norm(tangential, axis=-1) * jac[:, None]))
    i2 = float(np.sum(wts * np.linalg.norm(star, axis=-1) * jac[:, None]))
    return i1, i2


def green_reconstruct(f: SphereScalar, points: np.ndarray, n_radial: int = 200) -> np.ndarray:
    """(1/4pi) * integral of log(1 - x.y) Lap f(y) over y, at each point x."""
    lap = f.laplacian()
    L = max(f.L, 1)
    n_az = 2 * L + 2
    v, wv = leggauss(n_radial)
    v = 0.5 * (v + 1.0)
    wv = 0.5 * wv
    # 1 - cos(theta') = 2 v^2, sin(theta') d theta' = 4 v dv
    ct = 1.0 - 2.0 * v**2
    st = np.sqrt(np.clip(1.0 - ct**2, 0.0, None))
    ph = 2.0 * math.pi * np.arange(n_az) / n_az
    radial = np.log(2.0 * v**2) * 4.0 * v * wv
    local = np.stack(
        [np.outer(st, np.cos(ph)), np.outer(st, np.sin(ph)), np.outer(ct, np.ones_like(ph))], axis=-1
    )
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    out = np.empty(len(pts))
    for i, p in enumerate(pts):
        ys = local @ _frame(p)
        vals = lap.evaluate(ys)
        out[i] = np.sum(radial[:, None] * vals) * (2.0 * math.pi / n_az) / FOUR_PI
    return out.reshape(np.asarray(points).shape[:-1])


def calculus_identities(
    pair: OneFormPair,
    grid: QuadratureGrid,
    kernel_points: np.ndarray | None = None,
    green_source: SphereScalar | None = None,
    n_angle: int = 64,
    n_radial: int = 200,
) -> IdentityReport:
    """Quadrature checks of the L1 inequality, kernel integral and Green formula."""
    L = max(pair.phi.L, pair.psi.L)
    grid.require(L)
    notes = []
    w = grid.weights
    omega = np.abs(pair.field(grid))
    l1 = float(np.sum(w * omega))
    codiff = float(np.sum(w * np.abs(pair.phi.laplacian().synthesize(grid))))
    curl = float(np.sum(w * np.abs(pair.psi.laplacian().synthesize(grid))))
    bound = 0.5 * math.pi * (codiff + curl)
    ratio = l1 / bound if bound > 0 else 0.0

    if kernel_points is None:
        kernel_points = np.array([[0.0, 0.0, 1.0]])
    kernel_points = np.atleast_2d(kernel_points)
    if n_angle < 16:
        notes.append(f"n_angle={n_angle} too small for the kernel quadrature; use >= 32")
    kv, ks = zip(*(kernel_integral(y, n_angle) for y in kernel_points))
    # the stated pointwise value 1-(x.y)^2 integrates to 4 pi, not 2 pi^2
    notes.append("pointwise |d(x.y)| taken as sqrt(1-(x.y)^2); the squared reading integrates to 4*pi")

    src = green_source if green_source is not None else pair.psi
    if abs(src[0, 0]) > 1e-14:
        raise ValueError("Green representation needs a zero-mean source")
    if n_radial < 64:
        notes.append(f"n_radial={n_radial} under-resolves the logarithmic kernel; use >= 128")
    pts = grid.points[:: max(1, grid.n_theta // 8), :: max(1, grid.n_phi // 8)]
    rec = green_reconstruct(src, pts, n_radial)
    gerr = float(np.abs(rec - src.evaluate(pts)).max())

    return IdentityReport(
        l1_norm=l1,
        codiff_l1=codiff,
        curl_l1=curl,
        l1_ratio=ratio,
        kernel_points=kernel_points,
        kernel_values=np.array(kv),
        kernel_star_values=np.array(ks),
        kernel_reference=2.0 * math.pi**2,
        squared_norm_reading=FOUR_PI,
        green_error=gerr,
        notes=tuple(notes),
    )
