"""Finite-difference realization of the radial linearization operators.

Unknowns are stored in half-weighted form x_hat = r x on the staggered grid
r_j = (j + 1/2) h, so the measure r^2 dr becomes dr. In these variables

    d_r + 2/r  ->  D + 1/r,    -d_r  ->  -D + 1/r,    d_r  ->  D - 1/r,

with D the second-order central difference (one-sided at the innermost node,
zero Dirichlet ghost past r_max). Multiplicative terms are unchanged.

Block layout of the one-frequency matrices: for l >= 1 the unknown vector is
(A, P, B, Q, A~, P~, B~, Q~), where the tilde block belongs to conj(Psi_{-m});
for l = 0 it is the reduced (A, P, A~, P~). Each component occupies N
consecutive entries.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, SolerError
from .profiles import SolitonProfile

__all__ = [
    "BlockKind",
    "RadialGrid",
    "BlockOperatorMatrix",
    "make_radial_grid",
    "profile_on_grid",
    "derivative_matrix",
    "assemble_L0",
    "assemble_W",
    "assemble_generator",
    "assemble_bi_frequency",
    "assemble_RS",
    "swap_involution",
    "write_matrix_binary",
    "read_matrix_binary",
    "matrix_fingerprint",
]

MIN_POINTS = 16


class BlockKind(enum.Enum):
    ONE_FREQ = "ONE_FREQ"
    BI_FREQ = "BI_FREQ"
    RS_SECTOR = "RS_SECTOR"
    L0_ONLY = "L0_ONLY"


@dataclass(frozen=True)
class RadialGrid:
    N: int
    r_max: float

    @property
    def h(self) -> float:
        return self.r_max / self.N

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) * self.h


def make_radial_grid(N: int, r_max: float) -> RadialGrid:
    if int(N) != N or N < MIN_POINTS:
        raise InvalidArgument(f"N must be an integer >= {MIN_POINTS}, got {N}")
    if not r_max > 0:
        raise InvalidArgument(f"r_max must be positive, got {r_max}")
    return RadialGrid(int(N), float(r_max))


@dataclass
class BlockOperatorMatrix:
    """Dense real matrix M of a radial block; the stability generator is -i M."""

    kind: BlockKind
    ell: int
    m: int
    nu: float
    entries: np.ndarray
    grid: RadialGrid
    omega: float
    asymmetry: float | None = None

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def norm(self) -> float:
        """sqrt(||M||_1 ||M||_inf), a cheap upper bound for the spectral norm."""
        a = np.abs(self.entries)
        return float(math.sqrt(a.sum(axis=0).max() * a.sum(axis=1).max()))


def _warn_short_grid(profile: SolitonProfile, grid: RadialGrid) -> None:
    if grid.r_max < 20.0 / profile.decay_rate:
        warnings.warn(
            f"r_max = {grid.r_max:g} is below 20/kappa = {20.0 / profile.decay_rate:.3g}",
            RuntimeWarning,
            stacklevel=4,
        )


def profile_on_grid(profile: SolitonProfile, grid: RadialGrid, consistent: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Profile values at the grid nodes.

    With ``consistent`` the resampled profile is polished by Newton's method
    so that it solves the discrete stationary system exactly; the gauge
    vector is then an exact kernel vector of the assembled l = 0 block.
    """
    r = grid.r
    if r[-1] > profile.r[-1]:
        raise InvalidArgument(f"grid extends to {r[-1]:.6g}, beyond the profile (r_N = {profile.r[-1]:.6g})")
    key = (grid.N, grid.r_max)
    if not consistent:
        _warn_short_grid(profile, grid)
        return profile.resample(r)
    if key not in profile._grid_cache:
        _warn_short_grid(profile, grid)
        profile._grid_cache[key] = _discrete_profile(profile, grid)
    v, u = profile._grid_cache[key]
    return v.copy(), u.copy()


def _discrete_profile(profile: SolitonProfile, grid: RadialGrid, max_iter: int = 30):
    r = grid.r
    n = grid.N
    w = profile.omega
    model = profile.model
    v0, u0 = profile.resample(r)
    x = np.concatenate([r * v0, r * u0])
    d = derivative_matrix(grid)
    inv_r = np.diag(1.0 / r)
    for _ in range(max_iter):
        vh, uh = x[:n], x[n:]
        tau = (vh * vh - uh * uh) / r**2
        g = model.g(tau)
        gp = model.gprime(tau) * np.ones(n)
        res = np.concatenate([(g - w) * vh + (d + inv_r) @ uh, (-d + inv_r) @ vh - (g + w) * uh])
        jac = np.block(
            [
                [np.diag(g - w + 2.0 * gp * vh * vh / r**2), d + inv_r - np.diag(2.0 * gp * uh * vh / r**2)],
                [-d + inv_r - np.diag(2.0 * gp * vh * uh / r**2), np.diag(-g - w + 2.0 * gp * uh * uh / r**2)],
            ]
        )
        dx = np.linalg.solve(jac, -res)
        x += dx
        if np.max(np.abs(dx)) <= 1e-14 * max(1.0, np.max(np.abs(x))):
            break
    else:
        raise SolerError("Newton polish of the profile on the grid did not converge")
    if np.max(np.abs(x[:n] / r - v0)) > 0.1 * profile.amplitude:
        raise SolerError("Newton polish drifted away from the resampled profile")
    return x[:n] / r, x[n:] / r


def derivative_matrix(grid: RadialGrid) -> np.ndarray:
    """Central first difference on the staggered grid (dense N x N)."""
    n, h = grid.N, grid.h
    d = np.zeros((n, n))
    i = np.arange(1, n)
    d[i, i - 1] = -1.0
    d[i - 1, i] = 1.0
    d[0, :3] = (-3.0, 4.0, -1.0)
    # the last row keeps the zero ghost beyond r_max
    return d / (2.0 * h)


def _coefficients(profile: SolitonProfile, grid: RadialGrid):
    v, u = profile_on_grid(profile, grid)
    tau = v * v - u * u
    model = profile.model
    g = model.g(tau)
    gp = model.gprime(tau) * np.ones_like(tau)
    return v, u, g, gp


def _check_sector(ell: int, m: int):
    if int(ell) != ell or ell < 0:
        raise InvalidArgument(f"degree must be a nonnegative integer, got {ell}")
    if abs(m) > ell:
        raise InvalidArgument(f"|m| must not exceed l, got l={ell}, m={m}")


def _l0_entries(profile: SolitonProfile, ell: int, grid: RadialGrid) -> np.ndarray:
    n = grid.N
    r = grid.r
    w = profile.omega
    _, _, g, _ = _coefficients(profile, grid)
    kap = ell * (ell + 1)
    d = derivative_matrix(grid)
    eye = np.eye(n)
    inv_r = np.diag(1.0 / r)
    rows = {
        "A": {"A": np.diag(g - w), "P": d + inv_r, "Q": -kap * np.diag(1.0 / r**2)},
        "P": {"A": -d + inv_r, "P": -np.diag(g + w), "B": -kap * np.diag(1.0 / r**2)},
        "B": {"P": -eye, "B": np.diag(g - w), "Q": d - inv_r},
        "Q": {"A": -eye, "B": -d + inv_r, "Q": -np.diag(g + w)},
    }
    order = "APBQ"
    out = np.zeros((4 * n, 4 * n))
    for i, ri in enumerate(order):
        for j, cj in enumerate(order):
            blk = rows[ri].get(cj)
            if blk is not None:
                out[i * n : (i + 1) * n, j * n : (j + 1) * n] = blk
    return out


def assemble_L0(profile: SolitonProfile, ell: int, grid: RadialGrid) -> BlockOperatorMatrix:
    """L_0 on (A, P, B, Q) in half-weighted variables, size 4N."""
    _check_sector(ell, 0)
    return BlockOperatorMatrix(BlockKind.L0_ONLY, ell, 0, 0.0, _l0_entries(profile, ell, grid), grid, profile.omega)


def assemble_W(profile: SolitonProfile, grid: RadialGrid) -> np.ndarray:
    """The four N x N diagonal entries of W = g' (v, -u)^T (v, -u), as an array (2, 2, N, N)."""
    v, u, _, gp = _coefficients(profile, grid)
    w11, w12, w22 = gp * v * v, -gp * u * v, gp * u * u
    return np.array([[np.diag(w11), np.diag(w12)], [np.diag(w12), np.diag(w22)]])


def _w_block(profile, grid) -> np.ndarray:
    w = assemble_W(profile, grid)
    return np.block([[w[0, 0], w[0, 1]], [w[1, 0], w[1, 1]]])


def assemble_generator(
    profile: SolitonProfile,
    ell: int,
    m: int,
    grid: RadialGrid,
    coupling_scale: float = 1.0,
    kind: BlockKind = BlockKind.ONE_FREQ,
    nu: float = 0.0,
) -> BlockOperatorMatrix:
    """Real matrix M of the (l, m) block; the perturbation evolves by d/dt X = -i M X.

    For l >= 1 the coupling acting on ((A,P), (B,Q), (A~,P~), (B~,Q~)) is

        [[ W, -s(m/r)W,  W,  s(m/r)W],
         [ 0,  0,        0,  0      ],
         [-W,  s(m/r)W, -W, -s(m/r)W],
         [ 0,  0,        0,  0      ]]

    with s = ``coupling_scale``. At l = 0 the (B, Q) components are dropped.
    """
    _check_sector(ell, m)
    n = grid.N
    w = _w_block(profile, grid)
    if ell == 0:
        l0 = _l0_entries(profile, 0, grid)[: 2 * n, : 2 * n]
        z = np.zeros_like(l0)
        diag = np.block([[l0, z], [z, -l0]])
        coup = np.block([[w, w], [-w, -w]])
        return BlockOperatorMatrix(kind, 0, 0, nu, diag + coup, grid, profile.omega)

    l0 = _l0_entries(profile, ell, grid)
    z4 = np.zeros_like(l0)
    diag = np.block([[l0, z4], [z4, -l0]])
    mr = np.diag(np.tile(1.0 / grid.r, 2))
    # scale the formed (m/r)W block so BI_FREQ entries are exact multiples of ONE_FREQ ones
    mw = coupling_scale * (m * (mr @ w))
    z2 = np.zeros_like(w)
    coup = np.block(
        [
            [w, -mw, w, mw],
            [z2, z2, z2, z2],
            [-w, mw, -w, -mw],
            [z2, z2, z2, z2],
        ]
    )
    return BlockOperatorMatrix(kind, ell, m, nu, diag + coup, grid, profile.omega)


def assemble_bi_frequency(profile: SolitonProfile, ell: int, m: int, nu: float, grid: RadialGrid) -> BlockOperatorMatrix:
    """Block for the bi-frequency wave with xi = sqrt(1+nu^2) e1, eta = nu e1."""
    if nu < 0:
        raise InvalidArgument(f"nu must be nonnegative, got {nu}")
    return assemble_generator(profile, ell, m, grid, coupling_scale=1.0 + 2.0 * nu * nu, kind=BlockKind.BI_FREQ, nu=nu)


def assemble_RS(profile: SolitonProfile, ell: int, grid: RadialGrid) -> BlockOperatorMatrix:
    """R/S sector in half-weighted variables, symmetrized; size 2N.

        [[ g + omega,              D + (l+1)/r ],
         [ -D + (l+1)/r,           -g + omega  ]]

    ``asymmetry`` records the Frobenius norm of h r_i r_j (M - M^T)_ij before
    symmetrization; it is O(h^2).
    """
    _check_sector(ell, 0)
    n = grid.N
    r = grid.r
    w = profile.omega
    _, _, g, _ = _coefficients(profile, grid)
    d = derivative_matrix(grid)
    c = np.diag((ell + 1) / r)
    mat = np.block([[np.diag(g + w), d + c], [-d + c, np.diag(w - g)]])
    rr = np.tile(r, 2)
    skew = mat - mat.T
    asym = float(np.linalg.norm(grid.h * rr[:, None] * rr[None, :] * skew))
    sym = 0.5 * (mat + mat.T)
    return BlockOperatorMatrix(BlockKind.RS_SECTOR, ell, 0, 0.0, sym, grid, w, asymmetry=asym)


def swap_involution(size: int) -> np.ndarray:
    """J exchanging the Psi and conj-Psi halves of the unknown vector."""
    half = size // 2
    j = np.zeros((size, size))
    j[:half, half:] = np.eye(half)
    j[half:, :half] = np.eye(half)
    return j


def matrix_fingerprint(a: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(a, dtype="<f8").tobytes()).hexdigest()[:16]


def write_matrix_binary(block: BlockOperatorMatrix, path) -> None:
    """JSON header line, then row-major little-endian float64 entries."""
    header = {"kind": block.kind.value, "ell": block.ell, "m": block.m, "nu": block.nu, "size": block.size}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.ascontiguousarray(block.entries, dtype="<f8").tobytes())


def read_matrix_binary(path) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        data = np.frombuffer(fh.read(), dtype="<f8")
    n = header["size"]
    return header, data.reshape(n, n).copy()
