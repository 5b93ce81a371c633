"""Spinor fields on a radial x angular product grid.

A field is a complex array of shape (4, N_r, n_theta, n_phi): the upper
2-spinor in components 0-1, the lower in 2-3.

Coefficient convention for degree l (with T = sigma_r Sigma_Omega):

    upper = sum_m (A_m h_m e1 + B_m r^{-1} T h_m e1) + R h_{l,-l} e2
    lower = i sigma_r [ sum_m (P_m h_m e1 + Q_m r^{-1} T h_m e1) + S h_{l,-l} e2 ]

Since T(h_{l,l} e1) = -l h_{l,l} e1, the family is overcomplete by one
function per degree; B_{l,l} and Q_{l,l} are fixed to zero.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBasis, InvalidArgument
from .harmonics import (
    AngularGrid,
    basis_index,
    eval_harmonic,
    grid_for_degree,
    pauli_spherical,
    srso_matrix_elements,
)
from .linops import RadialGrid, profile_on_grid
from .profiles import SolitonProfile

__all__ = [
    "SpinorField",
    "BiFrequencyWave",
    "CoefficientSet",
    "ModeKind",
    "GAMMA2",
    "BETA",
    "build_one_frequency_wave",
    "bogoliubov_transform",
    "build_bi_frequency_wave",
    "scalar_density",
    "decompose_field",
    "reconstruct_field",
    "known_mode",
    "block_vector",
    "field_norm",
]

SIGMA2 = np.array([[0.0, -1j], [1j, 0.0]])
GAMMA2 = np.block([[np.zeros((2, 2)), SIGMA2], [-SIGMA2, np.zeros((2, 2))]])
BETA = np.diag([1.0, 1.0, -1.0, -1.0])
GRAM_COND_LIMIT = 1e8
UNIT_TOL = 1e-12


@dataclass
class SpinorField:
    r: np.ndarray
    angular: AngularGrid
    values: np.ndarray

    def __post_init__(self):
        expected = (4, self.r.size) + self.angular.shape
        if self.values.shape != expected:
            raise InvalidArgument(f"field values have shape {self.values.shape}, expected {expected}")

    @property
    def upper(self) -> np.ndarray:
        return self.values[:2]

    @property
    def lower(self) -> np.ndarray:
        return self.values[2:]


def field_norm(f: SpinorField, dr: float | None = None) -> float:
    """L2 norm with r^2 dr dOmega quadrature (midpoint rule in r)."""
    r = f.r
    if dr is None:
        dr = float(r[1] - r[0]) if r.size > 1 else 1.0
    dens = np.sum(np.abs(f.values) ** 2, axis=0)
    ang = np.sum(dens * f.angular.weights, axis=(-2, -1))
    return float(math.sqrt(np.sum(ang * r * r) * dr))


def _sigma_r(angular: AngularGrid) -> np.ndarray:
    th, ph = angular.mesh
    sig_r, _, _ = pauli_spherical(th, ph)
    return sig_r


def _check_vec(x, name):
    x = np.asarray(x, dtype=complex)
    if x.shape != (2,):
        raise InvalidArgument(f"{name} must be a complex 2-vector")
    return x


def _carrier(v, u, vec, sig_r):
    """(v vec ; i u sigma_r vec) on the product grid."""
    upper = v[None, :, None, None] * vec[:, None, None, None] * np.ones(sig_r.shape[2:])[None, None]
    srv = np.einsum("ij...,j->i...", sig_r, vec)
    lower = 1j * u[None, :, None, None] * srv[:, None]
    return np.concatenate([upper, lower])


def _radial_values(profile: SolitonProfile, radial):
    if isinstance(radial, RadialGrid):
        return radial.r, *profile_on_grid(profile, radial)
    r = np.asarray(radial, dtype=float)
    return (r, *profile.resample(r))


def build_one_frequency_wave(profile: SolitonProfile, xi, radial, angular: AngularGrid) -> SpinorField:
    """Sample (v xi ; i u sigma_r xi) at t = 0.

    ``radial`` is a RadialGrid (discrete-consistent profile values) or an
    array of radii (spline-resampled values).
    """
    xi = _check_vec(xi, "xi")
    if not np.any(xi != 0):
        raise InvalidArgument("xi must be nonzero")
    r, v, u = _radial_values(profile, radial)
    return SpinorField(r, angular, _carrier(v, u, xi, _sigma_r(angular)))


def _apply4(mat, values):
    return np.einsum("ij,j...->i...", mat, values)


def bogoliubov_transform(a: complex, b: complex, f: SpinorField) -> SpinorField:
    """psi -> a psi + b gamma^2 conj(psi), with |a|^2 - |b|^2 = 1."""
    if abs(abs(a) ** 2 - abs(b) ** 2 - 1.0) > UNIT_TOL:
        raise InvalidArgument(f"need |a|^2 - |b|^2 = 1, got {abs(a) ** 2 - abs(b) ** 2!r}")
    vals = a * f.values + b * _apply4(GAMMA2, np.conj(f.values))
    return SpinorField(f.r, f.angular, vals)


@dataclass
class BiFrequencyWave:
    profile: SolitonProfile
    xi: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        self.xi = _check_vec(self.xi, "xi")
        self.eta = _check_vec(self.eta, "eta")
        defect = np.vdot(self.xi, self.xi).real - np.vdot(self.eta, self.eta).real - 1.0
        if abs(defect) > UNIT_TOL:
            raise InvalidArgument(f"need |xi|^2 - |eta|^2 = 1, off by {defect:.3e}")


def build_bi_frequency_wave(wave: BiFrequencyWave, t: float, radial, angular: AngularGrid) -> SpinorField:
    """e^{-i omega t}(v xi; i u sigma_r xi) + e^{i omega t}(-i u sigma_r eta; v eta)."""
    r, v, u = _radial_values(wave.profile, radial)
    sig_r = _sigma_r(angular)
    w = wave.profile.omega
    first = _carrier(v, u, wave.xi, sig_r)
    c = _carrier(v, u, wave.eta, sig_r)
    # swap halves: (-i u sigma_r eta ; v eta) = (-lower, upper) of the eta carrier
    second = np.concatenate([-c[2:], c[:2]])
    vals = np.exp(-1j * w * t) * first + np.exp(1j * w * t) * second
    return SpinorField(r, angular, vals)


def scalar_density(f: SpinorField) -> np.ndarray:
    """Pointwise psi^* beta psi."""
    dens = np.einsum("i...,i...->...", np.conj(f.values), _apply4(BETA, f.values))
    if np.max(np.abs(dens.imag), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(dens.real), initial=0.0)):
        raise InvalidArgument("scalar density has a nonzero imaginary part")
    return dens.real


@dataclass
class CoefficientSet:
    """Radial coefficient functions over the degree-l invariant subspaces."""

    r: np.ndarray
    ell_max: int
    n_theta: int
    n_phi: int
    abpq: dict = field(default_factory=dict)  # (l, m) -> {"A","B","P","Q"}
    rs: dict = field(default_factory=dict)  # l -> {"R","S"}
    leakage: float = 0.0

    @property
    def angular(self) -> AngularGrid:
        from .harmonics import make_angular_grid

        return make_angular_grid(self.n_theta, self.n_phi)

    def support(self, tol: float = 1e-10) -> set:
        """Keys ((l, m) or l) whose coefficients exceed ``tol`` somewhere."""
        keys = set()
        for k, d in self.abpq.items():
            if any(np.max(np.abs(a)) > tol for a in d.values()):
                keys.add(k)
        for k, d in self.rs.items():
            if any(np.max(np.abs(a)) > tol for a in d.values()):
                keys.add(("RS", k))
        return keys

    def to_dict(self) -> dict:
        def enc(a):
            return [[float(z.real), float(z.imag)] for z in a]

        return {
            "r": [float(x) for x in self.r],
            "ell_max": self.ell_max,
            "leakage": self.leakage,
            "abpq": [
                {"ell": l, "m": m, **{k: enc(v) for k, v in d.items()}} for (l, m), d in sorted(self.abpq.items())
            ],
            "rs": [{"ell": l, **{k: enc(v) for k, v in d.items()}} for l, d in sorted(self.rs.items())],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _harmonic_table(ell_max: int, angular: AngularGrid) -> dict:
    th, ph = angular.mesh
    return {(l, m): eval_harmonic(l, m, th, ph) for l in range(ell_max + 1) for m in range(-l, l + 1)}


def _degree_basis(ell: int):
    """Columns of the non-orthogonal degree-l basis in the orthonormal (h_{l,m} e_s) coordinates.

    Order: A_m (m=-l..l), B'_m (m=-l..l-1, unscaled T h_m e1), R.
    """
    n = 2 * ell + 1
    t = srso_matrix_elements(ell)
    cols = []
    for m in range(-ell, ell + 1):
        e = np.zeros(2 * n, dtype=complex)
        e[basis_index(ell, m, 0)] = 1.0
        cols.append(e)
    for m in range(-ell, ell):
        cols.append(t[:, basis_index(ell, m, 0)])
    e = np.zeros(2 * n, dtype=complex)
    e[basis_index(ell, -ell, 1)] = 1.0
    cols.append(e)
    return np.array(cols).T


def decompose_field(f: SpinorField, ell_max: int) -> CoefficientSet:
    """Project onto the invariant-subspace basis by quadrature and a per-degree Gram solve."""
    if ell_max < 0:
        raise InvalidArgument("ell_max must be nonnegative")
    ang = f.angular
    r = f.r
    table = _harmonic_table(ell_max, ang)
    sig_r = _sigma_r(ang)
    upper = f.upper
    lower = -1j * np.einsum("ij...,jr...->ir...", sig_r, f.lower)
    wts = ang.weights
    out = CoefficientSet(r=r.copy(), ell_max=ell_max, n_theta=ang.theta.size, n_phi=ang.phi.size)
    recon = np.zeros_like(f.values)
    for ell in range(ell_max + 1):
        n = 2 * ell + 1
        basis = _degree_basis(ell)
        gram = basis.conj().T @ basis
        cond = np.linalg.cond(gram)
        if cond > GRAM_COND_LIMIT:
            raise DegenerateBasis(f"Gram matrix at l={ell} has condition number {cond:.3e}")
        coeffs = {}
        for name, spinor in (("upper", upper), ("lower", lower)):
            # orthonormal coordinates, shape (2n, N_r)
            c = np.zeros((2 * n, r.size), dtype=complex)
            for m in range(-ell, ell + 1):
                hw = np.conj(table[(ell, m)]) * wts
                for s in range(2):
                    c[basis_index(ell, m, s)] = np.sum(spinor[s] * hw, axis=(-2, -1))
            coeffs[name] = np.linalg.solve(gram, basis.conj().T @ c)
        for m in range(-ell, ell + 1):
            k = m + ell
            kb = n + m + ell
            d = {
                "A": coeffs["upper"][k],
                "P": coeffs["lower"][k],
                "B": r * coeffs["upper"][kb] if m < ell else np.zeros(r.size, dtype=complex),
                "Q": r * coeffs["lower"][kb] if m < ell else np.zeros(r.size, dtype=complex),
            }
            out.abpq[(ell, m)] = d
        out.rs[ell] = {"R": coeffs["upper"][-1], "S": coeffs["lower"][-1]}
    recon = reconstruct_field(out).values
    scale = np.max(np.abs(f.values), initial=0.0)
    out.leakage = float(np.max(np.abs(recon - f.values), initial=0.0) / scale) if scale > 0 else 0.0
    return out


def reconstruct_field(coeffs: CoefficientSet, angular: AngularGrid | None = None) -> SpinorField:
    ang = angular if angular is not None else coeffs.angular
    th, ph = ang.mesh
    sig_r, _, _ = pauli_spherical(th, ph)
    r = coeffs.r
    inv_r = 1.0 / r
    upper = np.zeros((2, r.size) + ang.shape, dtype=complex)
    inner = np.zeros_like(upper)
    from .harmonics import srso_on_harmonic

    for (ell, m), d in coeffs.abpq.items():
        h = eval_harmonic(ell, m, th, ph)
        t_col = srso_on_harmonic(ell, m, ang)[:, 0]  # T(h e1), shape (2, nt, np)
        upper[0] += d["A"][:, None, None] * h
        inner[0] += d["P"][:, None, None] * h
        b = d["B"] * inv_r
        q = d["Q"] * inv_r
        upper += b[None, :, None, None] * t_col[:, None]
        inner += q[None, :, None, None] * t_col[:, None]
    for ell, d in coeffs.rs.items():
        h = eval_harmonic(ell, -ell, th, ph)
        upper[1] += d["R"][:, None, None] * h
        inner[1] += d["S"][:, None, None] * h
    lower = 1j * np.einsum("ij...,jr...->ir...", sig_r, inner)
    return SpinorField(r.copy(), ang, np.concatenate([upper, lower]))


class ModeKind(enum.Enum):
    GAUGE = "GAUGE"
    TRANSLATION = "TRANSLATION"
    PSI1 = "PSI1"
    PSI2 = "PSI2"


def _mode_field(profile: SolitonProfile, kind: ModeKind, grid: RadialGrid, ang: AngularGrid) -> SpinorField:
    r = grid.r
    v, u = profile_on_grid(profile, grid)
    th, ph = ang.mesh
    sig_r, _, _ = pauli_spherical(th, ph)
    e1 = np.array([1.0, 0.0], dtype=complex)
    e2 = np.array([0.0, 1.0], dtype=complex)
    if kind is ModeKind.GAUGE:
        vals = 1j * _carrier(v, u, e1, sig_r)
    elif kind is ModeKind.PSI1:
        c = _carrier(v, u, e2, sig_r)
        vals = np.concatenate([-c[2:], c[:2]])
    elif kind is ModeKind.PSI2:
        c = _carrier(v, u, e1, sig_r)
        vals = np.concatenate([-c[2:], c[:2]])
    else:
        # d/dz of (v e1 ; i u sigma_r e1); v', u' from the stationary equations
        g = profile.model.g(v * v - u * u)
        w = profile.omega
        dv = -(g + w) * u
        du = (w - g) * v - 2.0 * u / r
        ct = np.cos(th)
        sig3 = np.diag([1.0, -1.0]).astype(complex)
        upper = np.zeros((2, r.size) + ang.shape, dtype=complex)
        upper[0] = dv[:, None, None] * ct
        srv = sig_r[:, 0]  # sigma_r e1
        d_sig = (sig3[:, 0][:, None, None] - ct * srv)  # (sigma_3 - cos(theta) sigma_r) e1
        lower = 1j * (du[None, :, None, None] * ct * srv[:, None] + (u / r)[None, :, None, None] * d_sig[:, None])
        vals = np.concatenate([upper, lower])
    return SpinorField(r.copy(), ang, vals)


def known_mode(profile: SolitonProfile, kind: ModeKind, grid: RadialGrid, ell_max: int = 1) -> CoefficientSet:
    """Decompose the closed-form symmetry or -2 omega mode on ``grid``."""
    ang = grid_for_degree(max(ell_max, 1))
    return decompose_field(_mode_field(profile, ModeKind(kind), grid, ang), ell_max)


def block_vector(coeffs: CoefficientSet, ell: int, m: int, part: str = "both") -> np.ndarray:
    """Half-weighted unknown vector of the (l, m) block.

    ``part="both"`` gives (Psi_m, conj(Psi_{-m})), the image of the field and its
    conjugate; ``part="psi"`` gives (Psi_m, 0), the complexified eigenvector form.
    At l = 0 only (A, P) are kept.
    """
    r = coeffs.r
    keys = "AP" if ell == 0 else "APBQ"
    psi = np.concatenate([r * coeffs.abpq[(ell, m)][k] for k in keys])
    if part == "psi":
        bar = np.zeros_like(psi)
    elif part == "both":
        bar = np.conj(np.concatenate([r * coeffs.abpq[(ell, -m)][k] for k in keys]))
    else:
        raise InvalidArgument(f"unknown part {part!r}")
    return np.concatenate([psi, bar])
