"""Ground-state solitary-wave profiles of the 3D Soler model.

The stationary radial system

    omega v = u' + 2u/r + g(v^2 - u^2) v
    omega u = -v' - g(v^2 - u^2) u

is solved by shooting on the amplitude a = v(0+) with u(0) = 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import BracketFailure, InvalidArgument

__all__ = [
    "NonlinearityModel",
    "ShootClass",
    "ShootOutcome",
    "SolitonProfile",
    "evaluate_nonlinearity",
    "integrate_shoot",
    "find_bracket",
    "solve_profile",
    "profile_residual",
    "decay_rate_fit",
    "write_profile_csv",
    "read_profile_csv",
]

R_START = 1e-6
DECAY_THRESHOLD = 1e-8
BLOWUP_FACTOR = 10.0
DOMINANCE = 0.1
INITIAL_LAYER = 8
INITIAL_SUBSTEPS = 16


@dataclass(frozen=True)
class NonlinearityModel:
    """Pure-power self-interaction f(tau) = strength * tau**power.

    ``strength = 0`` gives the linear Dirac equation (f == 0).
    """

    mass: float = 1.0
    power: int = 1
    strength: float = 1.0

    def __post_init__(self):
        if not self.mass > 0:
            raise InvalidArgument(f"mass must be positive, got {self.mass}")
        if int(self.power) != self.power or self.power < 1:
            raise InvalidArgument(f"power must be a positive integer, got {self.power}")

    def f(self, tau):
        return self.strength * tau**self.power

    def g(self, tau):
        return self.mass - self.f(tau)

    def gprime(self, tau):
        k = self.power
        if k == 1:
            return -self.strength * np.ones_like(tau) if isinstance(tau, np.ndarray) else -self.strength
        return -self.strength * k * tau ** (k - 1)


def evaluate_nonlinearity(model: NonlinearityModel, tau: float) -> tuple[float, float]:
    """Return ``(g(tau), g'(tau))`` with g = m - f."""
    return float(model.g(tau)), float(model.gprime(tau))


class ShootClass(enum.Enum):
    CROSSED_ZERO = "CROSSED_ZERO"
    BLEW_UP = "BLEW_UP"
    DECAYED = "DECAYED"


@dataclass
class ShootOutcome:
    kind: ShootClass
    amplitude: float
    r_stop: float
    r: np.ndarray | None = None
    v: np.ndarray | None = None
    u: np.ndarray | None = None


def _far_field_modes(r, kappa, mass, omega):
    """Decaying and growing solutions of the linear (g = m) radial system."""
    s = mass + omega
    dec = np.exp(-kappa * r) / r
    gro = np.exp(kappa * r) / r
    dec_u = dec * (kappa * r + 1.0) / (r * s)
    gro_u = -gro * (kappa * r - 1.0) / (r * s)
    return (dec, dec_u), (gro, gro_u)


def _mode_split(r, v, u, kappa, mass, omega):
    """Coefficients (alpha, beta) of (v, u) = alpha*decaying + beta*growing at radius r."""
    (dv, du), (gv, gu) = _far_field_modes(r, kappa, mass, omega)
    det = dv * gu - gv * du
    alpha = (v * gu - gv * u) / det
    beta = (dv * u - v * du) / det
    return alpha, beta


def _validate_omega(model, omega):
    if not (0.0 < omega < model.mass):
        raise InvalidArgument(f"omega must lie in (0, {model.mass}), got {omega}")


def integrate_shoot(
    model: NonlinearityModel,
    omega: float,
    amplitude: float,
    r_max: float,
    step: float,
    record: bool = False,
) -> ShootOutcome:
    """Integrate the stationary system outward from the regular start and classify.

    Classical RK4 with fixed step. Integration stops at the first sign change of
    v (CROSSED_ZERO) or when v exceeds 10*a (BLEW_UP). A trajectory whose
    components fall below 1e-8*a and stay there until ``r_max`` is DECAYED, as is
    one that reaches ``r_max`` with the decaying far-field mode still dominant
    (growing part at most ``DOMINANCE`` times the decaying part). Otherwise
    the sign of the growing far-field component decides between the two
    escape classes.
    """
    if step <= 0 or r_max <= 0:
        raise InvalidArgument("step and r_max must be positive")
    _validate_omega(model, omega)
    if amplitude <= 0:
        raise InvalidArgument("amplitude must be positive")

    m = model.mass
    k = model.power
    s = model.strength
    a = float(amplitude)
    w = float(omega)
    h = float(step)

    r = R_START
    g0 = m - s * (a * a) ** k
    v = a
    u = (w - g0) * a * r / 3.0

    rs, vs, us = ([r], [v], [u]) if record else (None, None, None)
    thr = DECAY_THRESHOLD * a
    big = BLOWUP_FACTOR * a
    below_since = None
    n_steps = int(math.ceil((r_max - R_START) / h))
    kind = None

    def rk4(r, v, u, h):
        half = 0.5 * h
        t = v * v - u * u
        g = m - s * t**k
        k1v = -(w + g) * u
        k1u = (w - g) * v - 2.0 * u / r

        rv = r + half
        v2 = v + half * k1v
        u2 = u + half * k1u
        t = v2 * v2 - u2 * u2
        g = m - s * t**k
        k2v = -(w + g) * u2
        k2u = (w - g) * v2 - 2.0 * u2 / rv

        v3 = v + half * k2v
        u3 = u + half * k2u
        t = v3 * v3 - u3 * u3
        g = m - s * t**k
        k3v = -(w + g) * u3
        k3u = (w - g) * v3 - 2.0 * u3 / rv

        rn = r + h
        v4 = v + h * k3v
        u4 = u + h * k3u
        t = v4 * v4 - u4 * u4
        g = m - s * t**k
        k4v = -(w + g) * u4
        k4u = (w - g) * v4 - 2.0 * u4 / rn

        return (
            v + h * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0,
            u + h * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0,
        )

    for i in range(n_steps):
        rn = R_START + (i + 1) * h
        if r < INITIAL_LAYER * h:
            # the 2u/r term is stiff for r << h; sub-step without changing the output grid
            hh = (rn - r) / INITIAL_SUBSTEPS
            for j in range(INITIAL_SUBSTEPS):
                v, u = rk4(r + j * hh, v, u, hh)
        else:
            v, u = rk4(r, v, u, rn - r)
        r = rn
        if record:
            rs.append(r)
            vs.append(v)
            us.append(u)

        if v < 0.0:
            kind = ShootClass.CROSSED_ZERO
            break
        if v > big:
            kind = ShootClass.BLEW_UP
            break
        if abs(v) < thr and abs(u) < thr:
            if below_since is None:
                below_since = r
        else:
            below_since = None

    if kind is None:
        if below_since is not None:
            kind = ShootClass.DECAYED
        else:
            kappa = math.sqrt(m * m - w * w)
            alpha, beta = _mode_split(r, v, u, kappa, m, w)
            (dv, _), (gv, _) = _far_field_modes(r, kappa, m, w)
            if abs(beta * gv) <= DOMINANCE * abs(alpha * dv):
                # still riding the decaying branch at the horizon
                kind = ShootClass.DECAYED
            else:
                kind = ShootClass.BLEW_UP if beta > 0 else ShootClass.CROSSED_ZERO

    out = ShootOutcome(kind=kind, amplitude=a, r_stop=r)
    if record:
        out.r = np.array(rs)
        out.v = np.array(vs)
        out.u = np.array(us)
    return out


@dataclass
class SolitonProfile:
    """Radial profile pair (v, u) of a one-frequency solitary wave.

    For r > ``cut_radius`` the profile is the decaying far-field solution
    ``tail_coefficient * exp(-kappa r)/r`` (and the matching u).
    """

    omega: float
    r: np.ndarray
    v: np.ndarray
    u: np.ndarray
    amplitude: float
    decay_rate: float
    model: NonlinearityModel = field(default_factory=NonlinearityModel)
    cut_radius: float = math.inf
    tail_coefficient: float = 0.0
    _spline: object = field(default=None, repr=False, compare=False)
    _grid_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def tau(self):
        return self.v**2 - self.u**2

    def resample(self, r) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate (v, u) at arbitrary radii inside (0, r_N]."""
        r = np.asarray(r, dtype=float)
        if self._spline is None:
            inner = self.r <= self.cut_radius
            if inner.sum() < 4:
                inner = np.ones_like(self.r, dtype=bool)
            self._spline = (
                CubicSpline(self.r[inner], self.v[inner]),
                CubicSpline(self.r[inner], self.u[inner]),
            )
        sv, su = self._spline
        v = sv(r)
        u = su(r)
        tail = r > self.cut_radius
        if np.any(tail):
            (dv, du), _ = _far_field_modes(r[tail], self.decay_rate, self.model.mass, self.omega)
            v[tail] = self.tail_coefficient * dv
            u[tail] = self.tail_coefficient * du
        # below the integration start the profile is flat to O(r^2)
        return v, u


def find_bracket(
    model: NonlinearityModel,
    omega: float,
    a_min: float = 1e-3,
    a_max: float = 20.0,
    factor: float = 1.05,
    step: float | None = None,
    r_max: float | None = None,
) -> tuple[float, float]:
    """Scan amplitudes upward from ``a_min`` for the first change of shooting class."""
    _validate_omega(model, omega)
    kappa = math.sqrt(model.mass**2 - omega**2)
    h = step if step is not None else 1e-3 / kappa
    # a coarser scan is enough to locate the sign change
    h_scan = max(h, 2e-2 / kappa)
    rm = r_max if r_max is not None else 40.0 / kappa
    a_prev = a_min
    c_prev = integrate_shoot(model, omega, a_prev, rm, h_scan).kind
    a = a_prev * factor
    while a <= a_max:
        c = integrate_shoot(model, omega, a, rm, h_scan).kind
        if c != c_prev and ShootClass.DECAYED not in (c, c_prev):
            return a_prev, a
        a_prev, c_prev = a, c
        a *= factor
    raise BracketFailure(f"no shooting sign change for amplitude in [{a_min}, {a_max}] at omega={omega}")


def solve_profile(
    model: NonlinearityModel,
    omega: float,
    bracket: tuple[float, float] | None = None,
    tol: float = 1e-12,
    step: float | None = None,
    horizon: float | None = None,
    r_end: float | None = None,
) -> SolitonProfile:
    """Bisect the shooting amplitude and assemble the ground-state profile.

    Parameters
    ----------
    bracket
        Amplitudes with different shooting classes. Found by an upward scan
        when omitted.
    tol
        Final width of the amplitude bracket.
    step
        RK4 step; defaults to 1e-3/kappa.
    horizon
        Shooting radius; defaults to 40/kappa.
    r_end
        Last radius of the returned grid; defaults to 200/kappa so that the
        1/r correction to the far-field log-slope is below 1%.
    """
    _validate_omega(model, omega)
    m = model.mass
    kappa = math.sqrt(m * m - omega * omega)
    h = step if step is not None else 1e-3 / kappa
    rm = horizon if horizon is not None else 40.0 / kappa
    r_end = r_end if r_end is not None else 200.0 / kappa
    if bracket is None:
        bracket = find_bracket(model, omega, step=h, r_max=rm)
    a_lo, a_hi = sorted(map(float, bracket))
    c_lo = integrate_shoot(model, omega, a_lo, rm, h).kind
    c_hi = integrate_shoot(model, omega, a_hi, rm, h).kind
    if c_lo == c_hi or ShootClass.DECAYED in (c_lo, c_hi):
        raise BracketFailure(f"amplitudes {a_lo}, {a_hi} are both {c_lo.value}")

    while a_hi - a_lo >= tol:
        mid = 0.5 * (a_lo + a_hi)
        if mid in (a_lo, a_hi):
            break
        c = integrate_shoot(model, omega, mid, rm, h).kind
        if c == ShootClass.DECAYED:
            a_lo = a_hi = mid
            break
        if c == c_lo:
            a_lo = mid
        else:
            a_hi = mid

    lo = integrate_shoot(model, omega, a_lo, rm, h, record=True)
    hi = integrate_shoot(model, omega, a_hi, rm, h, record=True)
    n = min(lo.r.size, hi.r.size)
    r = lo.r[:n]
    a = 0.5 * (a_lo + a_hi)

    # cut where the profile is small but both shots are still linearly close
    vmid = 0.5 * (lo.v[:n] + hi.v[:n])
    small = np.nonzero(np.abs(vmid) <= 1e-6 * a)[0]
    apart = np.nonzero(np.abs(hi.v[:n] - lo.v[:n]) > 1e-4 * a)[0]
    j = n - 1
    if small.size:
        j = min(j, small[0])
    if apart.size:
        j = min(j, max(apart[0] - 1, 4))

    # interpolate between the bracketing shots so the growing mode cancels at the cut
    _, b_lo = _mode_split(r[j], lo.v[j], lo.u[j], kappa, m, omega)
    _, b_hi = _mode_split(r[j], hi.v[j], hi.u[j], kappa, m, omega)
    t = b_lo / (b_lo - b_hi) if b_lo != b_hi else 0.5
    v_in = lo.v[: j + 1] + t * (hi.v[: j + 1] - lo.v[: j + 1])
    u_in = lo.u[: j + 1] + t * (hi.u[: j + 1] - lo.u[: j + 1])
    r_in = r[: j + 1]
    r_cut = r_in[-1]
    alpha, _ = _mode_split(r_cut, v_in[-1], u_in[-1], kappa, m, omega)

    # tail: spacing ramps geometrically from h to 0.05/kappa
    h_max = max(h, 0.05 / kappa)
    tail_r = []
    rr, dh = r_cut, h
    while rr < r_end:
        dh = min(dh * 1.05, h_max)
        rr = rr + dh
        tail_r.append(rr)
    tail_r = np.array(tail_r)
    (tv, tu), _ = _far_field_modes(tail_r, kappa, m, omega)

    return SolitonProfile(
        omega=float(omega),
        r=np.concatenate([r_in, tail_r]),
        v=np.concatenate([v_in, alpha * tv]),
        u=np.concatenate([u_in, alpha * tu]),
        amplitude=float(lo.amplitude + t * (hi.amplitude - lo.amplitude)),
        decay_rate=kappa,
        model=model,
        cut_radius=float(r_cut),
        tail_coefficient=float(alpha),
    )


def _five_point_derivative(r, y):
    """First derivative at interior nodes from 5-point Lagrange weights (any spacing)."""
    n = r.size
    idx = np.arange(2, n - 2)
    x = np.stack([r[idx + o] for o in range(-2, 3)])  # (5, M)
    xc = x[2]
    d = np.zeros(idx.size)
    for jj in range(5):
        denom = np.ones(idx.size)
        for ll in range(5):
            if ll != jj:
                denom *= x[jj] - x[ll]
        num = np.zeros(idx.size)
        for kk in range(5):
            if kk == jj:
                continue
            term = np.ones(idx.size)
            for ll in range(5):
                if ll not in (jj, kk):
                    term *= xc - x[ll]
            num += term
        d += num / denom * y[idx + jj - 2]
    return idx, d


def profile_residual(profile: SolitonProfile, model: NonlinearityModel | None = None) -> float:
    """Max absolute residual of both stationary equations at interior grid points."""
    model = model if model is not None else profile.model
    r, v, u = profile.r, profile.v, profile.u
    if r.size < 5:
        return 0.0
    w = profile.omega
    idx, dv = _five_point_derivative(r, v)
    _, du = _five_point_derivative(r, u)
    ri, vi, ui = r[idx], v[idx], u[idx]
    g = model.g(vi**2 - ui**2)
    res1 = w * vi - (du + 2.0 * ui / ri + g * vi)
    res2 = w * ui - (-dv - g * ui)
    return float(max(np.max(np.abs(res1)), np.max(np.abs(res2))))


def decay_rate_fit(profile: SolitonProfile) -> float:
    """Least-squares log-slope of sqrt(v^2+u^2) over the outer quarter, returned as a positive rate."""
    r = profile.r
    sel = r >= r[0] + 0.75 * (r[-1] - r[0])
    amp = np.sqrt(profile.v[sel] ** 2 + profile.u[sel] ** 2)
    slope = np.polyfit(r[sel], np.log(amp), 1)[0]
    return float(-slope)


def write_profile_csv(profile: SolitonProfile, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("r,v,u\n")
        # shortest round-trip representation
        for r, v, u in zip(profile.r.tolist(), profile.v.tolist(), profile.u.tolist()):
            fh.write(f"{r!r},{v!r},{u!r}\n")


def read_profile_csv(path, omega: float, model: NonlinearityModel) -> SolitonProfile:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    r, v, u = data.T
    return SolitonProfile(
        omega=omega,
        r=r,
        v=v,
        u=u,
        amplitude=float(v[0]),
        decay_rate=math.sqrt(model.mass**2 - omega**2),
        model=model,
    )
