"""Scalar spherical harmonics and the angular operator sigma_r Sigma_Omega.

Harmonics follow the convention without the Condon-Shortley phase:

    h_{l,m}(theta, phi) = N_{l,m} e^{i m phi} P_{l,m}(cos theta),   m >= 0
    h_{l,-m} = conj(h_{l,m})

with P_{l,m}(w) = (1 - w^2)^{m/2} (d/dw)^m P_l(w) and
N_{l,m} = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!).

Spinor fields on the sphere are complex arrays of shape (2, n_theta, n_phi).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "HarmonicIndex",
    "AngularGrid",
    "make_angular_grid",
    "assoc_legendre",
    "harmonic_norm",
    "eval_harmonic",
    "dtheta_harmonic",
    "pauli_spherical",
    "srso_apply",
    "srso_on_harmonic",
    "project",
    "srso_matrix_elements",
    "srso_leakage",
    "coupling_coefficients",
    "spin_orbit_angular",
    "laplace_beltrami_from_spin_orbit",
    "IdentityRecord",
    "verify_spin_orbit_identities",
    "identity_report_json",
    "basis_index",
]


@dataclass(frozen=True)
class HarmonicIndex:
    ell: int
    m: int

    def __post_init__(self):
        if self.ell < 0 or abs(self.m) > self.ell:
            raise InvalidArgument(f"need |m| <= l, got l={self.ell}, m={self.m}")

    @property
    def kappa(self) -> int:
        return self.ell * (self.ell + 1)


@dataclass(frozen=True)
class AngularGrid:
    """Gauss-Legendre nodes in cos(theta) times a uniform phi grid."""

    theta: np.ndarray
    phi: np.ndarray
    theta_weights: np.ndarray

    @property
    def shape(self):
        return (self.theta.size, self.phi.size)

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights for dOmega on the (theta, phi) mesh."""
        return np.outer(self.theta_weights, np.full(self.phi.size, 2.0 * np.pi / self.phi.size))

    @property
    def mesh(self):
        return np.meshgrid(self.theta, self.phi, indexing="ij")


@lru_cache(maxsize=64)
def make_angular_grid(n_theta: int, n_phi: int) -> AngularGrid:
    if n_theta < 1 or n_phi < 1:
        raise InvalidArgument("grid sizes must be positive")
    x, w = np.polynomial.legendre.leggauss(n_theta)
    # decreasing x gives increasing theta
    order = np.argsort(-x)
    theta = np.arccos(x[order])
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    return AngularGrid(theta=theta, phi=phi, theta_weights=w[order])


def grid_for_degree(ell_max: int) -> AngularGrid:
    """A grid that integrates products of harmonics up to degree ell_max + 2 exactly."""
    return make_angular_grid(ell_max + 4, 2 * ell_max + 8)


def assoc_legendre(ell: int, m: int, w):
    """P_{l,m}(w) by upward recurrence in l at fixed m (no Condon-Shortley phase)."""
    w = np.asarray(w, dtype=float)
    if np.any(np.abs(w) > 1.0):
        raise InvalidArgument("argument must lie in [-1, 1]")
    if m < 0:
        raise InvalidArgument("order must be nonnegative")
    if m > ell:
        return np.zeros_like(w)[()]
    s = np.sqrt(np.clip(1.0 - w * w, 0.0, None))
    # P_{m,m} = (2m-1)!! (1-w^2)^{m/2}
    p_mm = np.ones_like(w)
    for i in range(1, m + 1):
        p_mm = p_mm * (2 * i - 1) * s
    if ell == m:
        return p_mm[()]
    p_prev, p = p_mm, (2 * m + 1) * w * p_mm
    for ll in range(m + 2, ell + 1):
        p_prev, p = p, ((2 * ll - 1) * w * p - (ll + m - 1) * p_prev) / (ll - m)
    return p[()]


def harmonic_norm(ell: int, m: int) -> float:
    m = abs(m)
    return math.sqrt((2 * ell + 1) / (4 * math.pi) * math.factorial(ell - m) / math.factorial(ell + m))


def eval_harmonic(ell: int, m: int, theta, phi):
    """h_{l,m}(theta, phi); broadcasting over theta and phi."""
    HarmonicIndex(ell, m)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    mm = abs(m)
    val = harmonic_norm(ell, mm) * assoc_legendre(ell, mm, np.cos(theta)) * np.exp(1j * mm * phi)
    return np.conj(val) if m < 0 else val


def dtheta_harmonic(ell: int, m: int, theta, phi):
    """d/dtheta h_{l,m}, from the ladder relation

    d_theta h_{l,m} = m cot(theta) h_{l,m} - sqrt((l-m)(l+m+1)) e^{-i phi} h_{l,m+1},  m >= 0,

    and conjugation for m < 0. Valid at interior theta only.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    mm = abs(m)
    val = mm * np.cos(theta) / np.sin(theta) * eval_harmonic(ell, mm, theta, phi)
    if mm < ell:
        c = math.sqrt((ell - mm) * (ell + mm + 1))
        val = val - c * np.exp(-1j * phi) * eval_harmonic(ell, mm + 1, theta, phi)
    return np.conj(val) if m < 0 else val


def pauli_spherical(theta, phi):
    """sigma_r, sigma_theta and sigma_phi (the latter including 1/sin theta); shape (2, 2, ...)."""
    ct, st = np.cos(theta), np.sin(theta)
    ep, em = np.exp(1j * phi), np.exp(-1j * phi)
    zero = np.zeros(np.broadcast(theta, phi).shape)
    sig_r = np.array([[ct + zero, em * st], [ep * st, -ct + zero]])
    sig_t = np.array([[-st + zero, em * ct], [ep * ct, st + zero]])
    sig_p = np.array([[zero, -1j * em], [1j * ep, zero]]) / st
    return sig_r, sig_t, sig_p


def _matvec(mat, spinor):
    return np.einsum("ij...,j...->i...", mat, spinor)


def srso_on_harmonic(ell: int, m: int, grid: AngularGrid) -> np.ndarray:
    """sigma_r Sigma_Omega applied to h_{l,m} e_j, as a (2, 2, n_theta, n_phi) array.

    Column j holds the image of h_{l,m} e_j:

        (m / sin theta) [[-sin, e^{-i phi} cos], [e^{i phi} cos, sin]] h
        + [[0, e^{-i phi}], [-e^{i phi}, 0]] d_theta h
    """
    th, ph = grid.mesh
    h = eval_harmonic(ell, m, th, ph)
    dh = dtheta_harmonic(ell, m, th, ph)
    _, sig_t, _ = pauli_spherical(th, ph)
    zero = np.zeros_like(th)
    jmat = np.array([[zero, np.exp(-1j * ph)], [-np.exp(1j * ph), zero]])
    return (m / np.sin(th)) * sig_t * h + jmat * dh


def srso_apply(coeffs: dict, grid: AngularGrid) -> np.ndarray:
    """Apply sigma_r Sigma_Omega to a spinor field given by harmonic coefficients.

    ``coeffs`` maps (l, m) to a complex 2-vector c so the field is sum c h_{l,m}.
    """
    out = np.zeros((2,) + grid.shape, dtype=complex)
    for (ell, m), c in coeffs.items():
        op = srso_on_harmonic(ell, m, grid)
        out += np.einsum("ij...,j->i...", op, np.asarray(c, dtype=complex))
    return out


def project(values: np.ndarray, ell: int, m: int, grid: AngularGrid) -> np.ndarray:
    """Quadrature inner product <h_{l,m}, values> over the sphere (last two axes)."""
    th, ph = grid.mesh
    h = eval_harmonic(ell, m, th, ph)
    return np.sum(np.conj(h) * values * grid.weights, axis=(-2, -1))


def basis_index(ell: int, m: int, spin: int) -> int:
    """Position of h_{l,m} e_{spin+1} in the degree-l spinor basis (all e1 first, then e2)."""
    return spin * (2 * ell + 1) + (m + ell)


@lru_cache(maxsize=32)
def _srso_matrix_cached(ell: int):
    grid = grid_for_degree(ell)
    n = 2 * ell + 1
    mat = np.zeros((2 * n, 2 * n), dtype=complex)
    for k in range(-ell, ell + 1):
        op = srso_on_harmonic(ell, k, grid)
        for t in range(2):
            image = op[:, t]
            for m in range(-ell, ell + 1):
                c = project(image, ell, m, grid)
                for s in range(2):
                    mat[basis_index(ell, m, s), basis_index(ell, k, t)] = c[s]
    mat.setflags(write=False)
    return mat


def srso_matrix_elements(ell: int) -> np.ndarray:
    """Matrix of sigma_r Sigma_Omega in the orthonormal basis {h_{l,m} e1} + {h_{l,m} e2}.

    Entry [i, j] is the coefficient of basis_i in the image of basis_j; see
    :func:`basis_index` for the ordering.
    """
    if ell < 0:
        raise InvalidArgument("degree must be nonnegative")
    return _srso_matrix_cached(ell).copy()


def srso_leakage(ell: int) -> float:
    """Largest coefficient of sigma_r Sigma_Omega h_{l,k} e_j on degrees l' != l, l' <= l + 2."""
    grid = grid_for_degree(ell + 2)
    worst = 0.0
    for k in range(-ell, ell + 1):
        op = srso_on_harmonic(ell, k, grid)
        for t in range(2):
            image = op[:, t]
            for lp in range(0, ell + 3):
                if lp == ell:
                    continue
                for mp in range(-lp, lp + 1):
                    worst = max(worst, float(np.max(np.abs(project(image, lp, mp, grid)))))
    return worst


def coupling_coefficients(ell: int, xi, eta) -> np.ndarray:
    """C[m, k]: coefficient of h_{l,m} in xi* T h_{l,k} xi + eta* T h_{l,k} eta, T = sigma_r Sigma_Omega.

    Rows and columns are indexed by m + l.
    """
    xi = np.asarray(xi, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    if not (np.any(xi != 0) or np.any(eta != 0)):
        raise InvalidArgument("xi and eta cannot both vanish")
    mat = _srso_matrix_cached(ell)
    n = 2 * ell + 1
    blocks = [[mat[s * n : (s + 1) * n, t * n : (t + 1) * n] for t in range(2)] for s in range(2)]
    out = np.zeros((n, n), dtype=complex)
    for vec in (xi, eta):
        for s in range(2):
            for t in range(2):
                out += np.conj(vec[s]) * vec[t] * blocks[s][t]
    return out


def spin_orbit_angular(n: int, srso: np.ndarray) -> np.ndarray:
    """Angular part of the spin-orbit operator, S = (n-1)/2 - sigma_r Sigma_Omega."""
    return 0.5 * (n - 1) * np.eye(srso.shape[0]) - srso


def laplace_beltrami_from_spin_orbit(n: int, s_op: np.ndarray) -> np.ndarray:
    """Delta_Omega = ((n-2)/2)^2 - (S - 1/2)^2."""
    eye = np.eye(s_op.shape[0])
    shifted = s_op - 0.5 * eye
    return (0.5 * (n - 2)) ** 2 * eye - shifted @ shifted


@dataclass
class IdentityRecord:
    check_name: str
    ell: int
    max_abs_deviation: float


def _anticommutator_deviation(ell: int, grid: AngularGrid) -> float:
    """max | Sigma_Omega(sigma_r f) + sigma_r Sigma_Omega f - 2 f | over f = h_{l,m} e_j."""
    th, ph = grid.mesh
    sig_r, sig_t, sig_p = pauli_spherical(th, ph)
    st, ct = np.sin(th), np.cos(th)
    ep, em = np.exp(1j * ph), np.exp(-1j * ph)
    zero = np.zeros_like(th)
    dth_sig_r = sig_t
    dph_sig_r = np.array([[zero, -1j * em * st], [1j * ep * st, zero]])
    worst = 0.0
    for m in range(-ell, ell + 1):
        h = eval_harmonic(ell, m, th, ph)
        dth = dtheta_harmonic(ell, m, th, ph)
        dph = 1j * m * h
        for j in range(2):
            e = np.zeros((2,) + th.shape, dtype=complex)
            e[j] = 1.0
            f = e * h
            sigma_omega_f = _matvec(sig_p, e * dph) + _matvec(sig_t, e * dth)
            d_theta_srf = _matvec(dth_sig_r, f) + _matvec(sig_r, e * dth)
            d_phi_srf = _matvec(dph_sig_r, f) + _matvec(sig_r, e * dph)
            sigma_omega_srf = _matvec(sig_p, d_phi_srf) + _matvec(sig_t, d_theta_srf)
            dev = sigma_omega_srf + _matvec(sig_r, sigma_omega_f) - 2.0 * f
            worst = max(worst, float(np.max(np.abs(dev))))
    return worst


def verify_spin_orbit_identities(ell_max: int, n: int = 3) -> list[IdentityRecord]:
    """Check the angular identities degree by degree.

    anticommutator
        {Sigma_Omega, sigma_r} = 2 I pointwise on the grid.
    spin_orbit_laplacian
        ((n-2)/2)^2 - (S - 1/2)^2 = -l(l+1) with S = (n-1)/2 - sigma_r Sigma_Omega.
    degree_leakage
        sigma_r Sigma_Omega has no component outside degree l.
    """
    if ell_max < 1:
        raise InvalidArgument("ell_max must be at least 1")
    if n != 3:
        raise InvalidArgument("numeric checks are implemented for n = 3 only")
    grid = grid_for_degree(ell_max)
    records = []
    for ell in range(ell_max + 1):
        records.append(IdentityRecord("anticommutator", ell, _anticommutator_deviation(ell, grid)))
        mat = srso_matrix_elements(ell)
        lap = laplace_beltrami_from_spin_orbit(n, spin_orbit_angular(n, mat))
        kappa = ell * (ell + n - 2)
        dev = np.max(np.abs(lap + kappa * np.eye(mat.shape[0])))
        records.append(IdentityRecord("spin_orbit_laplacian", ell, float(dev)))
        records.append(IdentityRecord("degree_leakage", ell, srso_leakage(ell)))
    return records


def identity_report_json(records: list[IdentityRecord]) -> str:
    return json.dumps([asdict(r) for r in records], indent=2)
