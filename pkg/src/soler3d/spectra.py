"""Spectra of the assembled blocks: eigensolves, refinement filtering,
classification and the instability threshold sweep."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import BracketFailure, EigensolverError, InvalidArgument
from .linops import (
    BlockKind,
    BlockOperatorMatrix,
    RadialGrid,
    assemble_bi_frequency,
    assemble_generator,
    assemble_RS,
    make_radial_grid,
    matrix_fingerprint,
)
from .profiles import NonlinearityModel, SolitonProfile, solve_profile

__all__ = [
    "Sector",
    "SpectrumReport",
    "SweepResult",
    "build_block",
    "compute_spectrum",
    "refine_and_filter",
    "classify_spectrum",
    "analyze_sector",
    "pairing_defect",
    "sweep_threshold",
    "IMAGINARY",
    "REAL_PAIR",
    "COMPLEX_QUAD",
    "FILTERED",
    "ESSENTIAL",
    "UNCLASSIFIED",
]

IMAGINARY = "IMAGINARY"
REAL_PAIR = "REAL_PAIR"
COMPLEX_QUAD = "COMPLEX_QUAD"
FILTERED = "FILTERED"
# unmatched eigenvalue inside the essential band; reported but never classified
ESSENTIAL = "ESSENTIAL"
UNCLASSIFIED = "UNCLASSIFIED"

MATCH_FLOOR = 1e-3


@dataclass(frozen=True)
class Sector:
    kind: BlockKind = BlockKind.ONE_FREQ
    ell: int = 0
    m: int = 0
    nu: float = 0.0

    def __post_init__(self):
        if self.ell < 0 or abs(self.m) > self.ell:
            raise InvalidArgument(f"sector needs |m| <= l, got l={self.ell}, m={self.m}")
        if self.nu < 0:
            raise InvalidArgument("nu must be nonnegative")
        if self.kind is BlockKind.L0_ONLY:
            raise InvalidArgument("L0_ONLY is not a stability sector")

    def as_dict(self) -> dict:
        return {"kind": self.kind.value, "ell": self.ell, "m": self.m, "nu": self.nu}


def build_block(profile: SolitonProfile, sector: Sector, grid: RadialGrid) -> BlockOperatorMatrix:
    if sector.kind is BlockKind.RS_SECTOR:
        return assemble_RS(profile, sector.ell, grid)
    if sector.kind is BlockKind.BI_FREQ:
        return assemble_bi_frequency(profile, sector.ell, sector.m, sector.nu, grid)
    return assemble_generator(profile, sector.ell, sector.m, grid)


def compute_spectrum(block: BlockOperatorMatrix) -> np.ndarray:
    """All eigenvalues lambda = -i mu of the generator, mu running over the eigenvalues of M."""
    a = block.entries
    if not np.all(np.isfinite(a)):
        raise InvalidArgument("block has non-finite entries")
    try:
        if block.kind is BlockKind.RS_SECTOR:
            mu = scipy.linalg.eigh(a, eigvals_only=True).astype(complex)
        else:
            mu = scipy.linalg.eigvals(a, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        fp = matrix_fingerprint(a)
        raise EigensolverError(f"eigensolver failed for {block.kind.value} block (l={block.ell}, m={block.m}): {exc}", fp) from exc
    lam = -1j * mu
    # sort for reproducible output: by imaginary part, then real part
    order = np.lexsort((np.round(lam.real, 12), np.round(lam.imag, 12)))
    return lam[order]


@dataclass
class SpectrumReport:
    sector: Sector
    omega: float
    N: int
    r_max: float
    eigenvalues: np.ndarray
    classes: list[str]
    matrix_norm: float
    mass: float = 1.0
    growth_rate: float = 0.0
    fine_eigenvalues: np.ndarray | None = field(default=None, repr=False)

    def kept(self) -> np.ndarray:
        mask = np.array([c not in (FILTERED, ESSENTIAL) for c in self.classes], dtype=bool)
        return self.eigenvalues[mask]

    def count(self, cls: str) -> int:
        return sum(1 for c in self.classes if c == cls)

    @property
    def has_real_pair(self) -> bool:
        return REAL_PAIR in self.classes

    def to_dict(self) -> dict:
        return {
            "sector": self.sector.as_dict(),
            "omega": self.omega,
            "N": self.N,
            "r_max": self.r_max,
            "matrix_norm": self.matrix_norm,
            "growth_rate": self.growth_rate,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "classes": list(self.classes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_csv(self) -> str:
        lines = ["re,im,class"]
        for z, c in zip(self.eigenvalues, self.classes):
            lines.append(f"{float(z.real)!r},{float(z.imag)!r},{c}")
        return "\n".join(lines) + "\n"


def _nearest_distance(values: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """For each value, distance to the nearest target (sorted search on the imaginary axis)."""
    if targets.size == 0:
        return np.full(values.shape, np.inf)
    order = np.argsort(targets.imag)
    t = targets[order]
    ti = t.imag
    out = np.empty(values.size)
    for k, z in enumerate(values):
        lo = np.searchsorted(ti, z.imag - 1.0)
        hi = np.searchsorted(ti, z.imag + 1.0)
        window = t[max(lo - 1, 0) : hi + 1]
        best = np.min(np.abs(window - z)) if window.size else np.inf
        out[k] = best if best <= 1.0 else np.min(np.abs(t - z))
    return out


def refine_and_filter(
    profile: SolitonProfile,
    sector: Sector,
    grid: RadialGrid,
    coarse: np.ndarray | None = None,
    fine: np.ndarray | None = None,
) -> SpectrumReport:
    """Keep the eigenvalues at N that reappear at 2N (same r_max).

    Match tolerance is max(1e-3, 10 h^2 m) with h the coarse spacing and m the
    mass. Unmatched eigenvalues with |Im lambda| >= m - omega lie in the
    essential band and are labelled ESSENTIAL; the rest are FILTERED.
    """
    block = build_block(profile, sector, grid)
    if coarse is None:
        coarse = compute_spectrum(block)
    if fine is None:
        fine_grid = make_radial_grid(2 * grid.N, grid.r_max)
        fine = compute_spectrum(build_block(profile, sector, fine_grid))
    mass = profile.model.mass
    tol = max(MATCH_FLOOR, 10.0 * grid.h**2 * mass)
    gap = mass - profile.omega
    dist = _nearest_distance(coarse, fine)
    classes = []
    for z, d in zip(coarse, dist):
        if d <= tol:
            classes.append(UNCLASSIFIED)
        elif abs(z.imag) >= gap:
            classes.append(ESSENTIAL)
        else:
            classes.append(FILTERED)
    return SpectrumReport(
        sector=sector,
        omega=profile.omega,
        N=grid.N,
        r_max=grid.r_max,
        eigenvalues=coarse,
        classes=classes,
        matrix_norm=block.norm,
        mass=mass,
        fine_eigenvalues=fine,
    )


def classify_spectrum(report: SpectrumReport, tol_real: float = 1e-4) -> SpectrumReport:
    """Label kept eigenvalues; ``tol_real`` is relative to the matrix norm."""
    if tol_real <= 0:
        raise InvalidArgument("tol_real must be positive")
    tol = tol_real * report.matrix_norm
    classes = []
    growth = 0.0
    for z, c in zip(report.eigenvalues, report.classes):
        if c in (FILTERED, ESSENTIAL):
            classes.append(c)
            continue
        if abs(z.real) <= tol:
            classes.append(IMAGINARY)
        elif abs(z.imag) <= tol:
            classes.append(REAL_PAIR)
        else:
            classes.append(COMPLEX_QUAD)
        if z.real > tol:
            growth = max(growth, float(z.real))
    report.classes = classes
    report.growth_rate = growth
    return report


def analyze_sector(
    profile: SolitonProfile,
    sector: Sector,
    grid: RadialGrid,
    tol_real: float = 1e-4,
) -> SpectrumReport:
    return classify_spectrum(refine_and_filter(profile, sector, grid), tol_real)


def pairing_defect(eigenvalues: np.ndarray, partners: np.ndarray | None = None) -> tuple[float, float]:
    """Largest distance from -lambda and from -conj(lambda) to the partner set.

    ``partners`` defaults to ``eigenvalues``; for a sector with m != 0 the
    -lambda partners live in the (l, -m) block, so pass that spectrum there.
    """
    lam = np.asarray(eigenvalues)
    if lam.size == 0:
        return 0.0, 0.0
    pool_neg = np.asarray(partners) if partners is not None else lam
    d_neg = _nearest_distance(-lam, pool_neg)
    d_conj = _nearest_distance(-np.conj(lam), lam)
    return float(d_neg.max()), float(d_conj.max())


@dataclass
class SweepResult:
    omegas: list[float]
    growth_rates: list[float]
    real_pair: list[bool]
    omega_star: float
    bracket: tuple[float, float]
    reports: dict = field(default_factory=dict, repr=False)

    @property
    def monotone(self) -> bool:
        order = np.argsort(self.omegas)
        g = np.asarray(self.growth_rates)[order]
        return bool(np.all(np.diff(g) >= 0))

    def to_csv(self) -> str:
        lines = ["omega,growth_rate"]
        for w, g in sorted(zip(self.omegas, self.growth_rates)):
            lines.append(f"{float(w)!r},{float(g)!r}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {"omega_star": self.omega_star, "bracket": list(self.bracket)}

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=1)


def sweep_threshold(
    model: NonlinearityModel,
    sector: Sector,
    omega_lo: float,
    omega_hi: float,
    tol_omega: float,
    N: int = 400,
    r_max: float = 40.0,
    tol_real: float = 1e-4,
    profile_tol: float = 1e-12,
    workers: int = 1,
    log=None,
) -> SweepResult:
    """Bisect in omega on the presence of a REAL_PAIR in the sector spectrum."""
    if not omega_lo < omega_hi:
        raise InvalidArgument(f"need omega_lo < omega_hi, got [{omega_lo}, {omega_hi}]")
    if tol_omega <= 0:
        raise InvalidArgument("tol_omega must be positive")
    grid = make_radial_grid(N, r_max)
    samples: dict[float, SpectrumReport] = {}

    def evaluate(w: float) -> SpectrumReport:
        prof = solve_profile(model, w, tol=profile_tol)
        rep = analyze_sector(prof, sector, grid, tol_real)
        if log is not None:
            log(f"omega={w:.6f} growth={rep.growth_rate:.3e} real_pair={rep.has_real_pair}")
        return rep

    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, 2)) as pool:
            lo_rep, hi_rep = pool.map(evaluate, (omega_lo, omega_hi))
    else:
        lo_rep, hi_rep = evaluate(omega_lo), evaluate(omega_hi)
    samples[omega_lo], samples[omega_hi] = lo_rep, hi_rep
    if lo_rep.has_real_pair == hi_rep.has_real_pair:
        raise BracketFailure(
            f"real-pair detection does not change across [{omega_lo}, {omega_hi}] "
            f"(growth {lo_rep.growth_rate:.3e} and {hi_rep.growth_rate:.3e})"
        )
    lo, hi = omega_lo, omega_hi
    lo_state = lo_rep.has_real_pair
    while hi - lo > tol_omega:
        mid = 0.5 * (lo + hi)
        rep = evaluate(mid)
        samples[mid] = rep
        if rep.has_real_pair == lo_state:
            lo = mid
        else:
            hi = mid
    ws = sorted(samples)
    return SweepResult(
        omegas=ws,
        growth_rates=[samples[w].growth_rate for w in ws],
        real_pair=[samples[w].has_real_pair for w in ws],
        omega_star=0.5 * (lo + hi),
        bracket=(lo, hi),
        reports=samples,
    )
