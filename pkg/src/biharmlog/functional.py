"""The variational core: energy, weak-form residual, fibering maps,
Nehari projection, and the logarithmic inequalities.

Every integral here uses the same discrete objects, the stiffness
quadratic form for the curvature term and the ball quadrature weights
for the mass, logarithmic, and critical terms.  That shared choice is
what makes the algebraic identities of the continuum exact at the
discrete level: the ray derivative of the energy equals t psi'(t) to
roundoff, not merely to discretization error, so the fibering tests
probe real structure instead of grid artifacts.

Conventions.  The integrands u^2 ln u^2 and u ln u^2 are extended by 0
at u = 0 (their continuous limits), and the critical nonlinearity keeps
its sign-preserving form |u|^(p-2) u.  Profiles must carry an exact
zero at r = R; the mirror row of the clamped Laplacian encodes the
derivative condition.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .constants import Params
from .discretization import (
    RadialFunction,
    biharmonic_solve,
    quad_ball,
    radial_derivative,
)
from .errors import DegenerateProfile, NumericsError

__all__ = [
    "ManifoldBranch",
    "FiberingReport",
    "FiberScalars",
    "energy",
    "weak_pairing",
    "residual",
    "fibering",
    "fibering_derivs",
    "psi_value",
    "psi_derivs",
    "nehari_project",
    "nehari_root",
    "log_sobolev_gap",
    "poincare_bilap_gap",
    "InequalityCheck",
    "elementary_inequalities",
]

# stationarity residuals are accepted below this, relative to the term
# scale; the branch dead band maps near-degenerate second derivatives
# to the flat branch
ROOT_RTOL = 1e-12
BRANCH_DEAD_BAND = 1e-10


class ManifoldBranch(enum.Enum):
    NPLUS = "Nplus"
    NZERO = "Nzero"
    NMINUS = "Nminus"


@dataclass(frozen=True)
class FiberingReport:
    t_star: float
    psi1: float
    psi2_at_one_after: float
    branch: ManifoldBranch


def _require_clamped(u):
    if u.values[-1] != 0.0:
        raise ValueError("profile must vanish exactly at r = R")


def _require_matching(u, p):
    if abs(u.grid.R - p.R) > 1e-12 * p.R:
        raise ValueError("grid radius does not match the parameter set")


def _sq_log_sq(v):
    # v^2 ln v^2 with the continuous extension 0 at v = 0
    out = np.zeros_like(v)
    nz = v != 0.0
    vv = v[nz] * v[nz]
    out[nz] = vv * np.log(vv)
    return out


def _log_force(v):
    # v ln v^2, extension 0 at v = 0
    out = np.zeros_like(v)
    nz = v != 0.0
    out[nz] = v[nz] * np.log(v[nz] * v[nz])
    return out


def _bilap_pairing(grid, N, x, y):
    # evaluate the stiffness form through its factored definition,
    # sum of m_i (Lx)_i (Ly)_i; mathematically x^T K y but without the
    # h^-4 cancellation noise of forming K v first
    L = grid.laplacian_clamped_matrix(N)
    m = grid.cell_masses(N)
    return float(np.dot(m * (L @ x), L @ y))


@dataclass(frozen=True)
class FiberScalars:
    """The four integrals that determine the energy along a ray t -> tu:
    squared natural norm, squared mass, logarithmic moment, and the
    critical-power integral, plus the critical exponent."""

    curvature: float
    mass: float
    log_moment: float
    crit: float
    p_crit: float

    @classmethod
    def from_function(cls, u: RadialFunction, p: Params) -> "FiberScalars":
        _require_clamped(u)
        _require_matching(u, p)
        grid = u.grid
        x = u.values[: grid.n - 1]
        with np.errstate(over="ignore", invalid="ignore"):
            # non-finite values propagate and are rejected by callers
            curvature = _bilap_pairing(grid, p.N, x, x)
            w = grid.ball_weights(p.N)
            v = u.values
            mass = float(w @ (v * v))
            log_moment = float(w @ _sq_log_sq(v))
            crit = float(w @ np.abs(v) ** p.p_crit)
        return cls(curvature, mass, log_moment, crit, p.p_crit)

    def scaled(self, t) -> "FiberScalars":
        """Scalars of the dilated profile t u."""
        if not (t > 0.0):
            raise ValueError("ray parameter must be positive")
        t2 = t * t
        return FiberScalars(
            curvature=t2 * self.curvature,
            mass=t2 * self.mass,
            log_moment=t2 * (self.log_moment + self.mass * math.log(t2)),
            crit=t**self.p_crit * self.crit,
            p_crit=self.p_crit,
        )


def _energy_from_scalars(s: FiberScalars, p: Params) -> float:
    return (
        0.5 * s.curvature
        - 0.5 * p.lam * s.mass
        + 0.5 * p.mu * s.mass
        - 0.5 * p.mu * s.log_moment
        - s.crit / s.p_crit
    )


def energy(u: RadialFunction, p: Params) -> float:
    """Energy of a clamped profile; raises on non-finite intermediates
    (overflow on huge inputs)."""
    s = FiberScalars.from_function(u, p)
    val = _energy_from_scalars(s, p)
    if not math.isfinite(val):
        raise NumericsError("energy overflowed; profile magnitude is too large")
    return val


def _lower_order_force(u: RadialFunction, p: Params):
    v = u.values
    return p.lam * v + p.mu * _log_force(v) + np.abs(v) ** (p.p_crit - 2.0) * v


def weak_pairing(u: RadialFunction, phi: RadialFunction, p: Params) -> float:
    """Directional derivative of the energy at u in the direction phi,
    assembled in weak form."""
    _require_clamped(u)
    _require_clamped(phi)
    _require_matching(u, p)
    grid = u.grid
    if phi.grid is not grid and not np.array_equal(phi.grid.nodes, grid.nodes):
        raise ValueError("profile and direction live on different grids")
    x = u.values[: grid.n - 1]
    y = phi.values[: grid.n - 1]
    bilap = _bilap_pairing(grid, p.N, x, y)
    low = float(grid.ball_weights(p.N) @ (_lower_order_force(u, p) * phi.values))
    return bilap - low


def residual(u: RadialFunction, p: Params):
    """Riesz representative G of the energy derivative at u (so that
    the pairing of the derivative with any phi equals the stiffness
    pairing of G with phi) and its natural norm.  A zero norm means a
    discrete weak solution."""
    _require_clamped(u)
    _require_matching(u, p)
    grid = u.grid
    load = RadialFunction(grid, _lower_order_force(u, p))
    rep = RadialFunction(grid, u.values - biharmonic_solve(load, p.N).values)
    x = rep.values[: grid.n - 1]
    norm_sq = _bilap_pairing(grid, p.N, x, x)
    return rep, math.sqrt(max(norm_sq, 0.0))


def psi_value(s: FiberScalars, p: Params, t) -> float:
    """Energy along the ray, I(tu), from cached scalars in O(1)."""
    if not (t > 0.0):
        raise ValueError("ray parameter must be positive")
    log_t2 = math.log(t * t)
    t2 = t * t
    return (
        0.5 * t2 * (s.curvature - p.lam * s.mass + p.mu * s.mass)
        - 0.5 * p.mu * s.mass * t2 * log_t2
        - 0.5 * p.mu * t2 * s.log_moment
        - t**s.p_crit * s.crit / s.p_crit
    )


def psi_derivs(s: FiberScalars, p: Params, t):
    """(psi'(t), psi''(t)) along the ray, from cached scalars."""
    if not (t > 0.0):
        raise ValueError("ray parameter must be positive")
    log_t2 = math.log(t * t)
    head = s.curvature - p.lam * s.mass - p.mu * s.log_moment
    d1 = t * (head - p.mu * s.mass * log_t2) - t ** (s.p_crit - 1.0) * s.crit
    d2 = (
        head
        - p.mu * s.mass * (log_t2 + 2.0)
        - (s.p_crit - 1.0) * t ** (s.p_crit - 2.0) * s.crit
    )
    return d1, d2


def fibering(u: RadialFunction, p: Params, t) -> float:
    if not (t > 0.0):
        raise ValueError("ray parameter must be positive")
    s = FiberScalars.from_function(u, p)
    if s.mass == 0.0:
        raise ValueError("fibering needs a nonzero profile")
    return psi_value(s, p, t)


def fibering_derivs(u: RadialFunction, p: Params, t):
    if not (t > 0.0):
        raise ValueError("ray parameter must be positive")
    s = FiberScalars.from_function(u, p)
    if s.mass == 0.0:
        raise ValueError("fibering needs a nonzero profile")
    return psi_derivs(s, p, t)


SCAN_RANGE = (1e-6, 1e6)
SCAN_POINTS = 481


def _stationarity(s: FiberScalars, p: Params, t):
    # psi'(t)/t: roots in t > 0 coincide with the fibering stationary
    # points but the function is better behaved for scanning
    head = s.curvature - p.lam * s.mass - p.mu * s.log_moment
    return head - p.mu * s.mass * np.log(t * t) - s.crit * t ** (s.p_crit - 2.0)


def _root_scale(s: FiberScalars, p: Params, t) -> float:
    return (
        abs(s.curvature - p.lam * s.mass - p.mu * s.log_moment)
        + abs(p.mu) * s.mass * abs(math.log(t * t))
        + s.crit * t ** (s.p_crit - 2.0)
    )


def nehari_root(s: FiberScalars, p: Params) -> float:
    """Positive stationary point of the fibering map: the unique one for
    mu >= 0, the largest on the scan range for mu < 0."""
    if s.mass <= 0.0 or s.crit <= 0.0:
        raise ValueError("projection needs a nonzero profile")
    ts = np.geomspace(SCAN_RANGE[0], SCAN_RANGE[1], SCAN_POINTS)
    g = _stationarity(s, p, ts)
    sign_flip = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
    exact = np.nonzero(g == 0.0)[0]
    if sign_flip.size == 0 and exact.size == 0:
        raise DegenerateProfile(
            "no fibering stationary point on the scan range; the ray "
            "never meets the constraint manifold"
        )
    if exact.size and (sign_flip.size == 0 or exact[-1] > sign_flip[-1] + 1):
        t_star = float(ts[exact[-1]])
    else:
        k = int(sign_flip[-1])
        t_star = brentq(
            lambda t: _stationarity(s, p, t), ts[k], ts[k + 1], xtol=1e-300, rtol=8.9e-16
        )
    # one guarded Newton polish on psi'
    d1, d2 = psi_derivs(s, p, t_star)
    if d2 != 0.0:
        step = d1 / d2
        if abs(step) < 0.1 * t_star:
            t_new = t_star - step
            if abs(psi_derivs(s, p, t_new)[0]) < abs(d1):
                t_star = t_new
    return t_star


def nehari_project(u: RadialFunction, p: Params) -> FiberingReport:
    """Project a nonzero profile onto the stationary set of its fibering
    map and classify the branch by the second derivative there."""
    s = FiberScalars.from_function(u, p)
    t_star = nehari_root(s, p)
    psi1 = psi_derivs(s, p, t_star)[0]
    after = s.scaled(t_star)
    psi2_after = psi_derivs(after, p, 1.0)[1]
    if abs(psi2_after) <= BRANCH_DEAD_BAND * (1.0 + after.curvature):
        branch = ManifoldBranch.NZERO
    elif psi2_after > 0.0:
        branch = ManifoldBranch.NPLUS
    else:
        branch = ManifoldBranch.NMINUS
    return FiberingReport(t_star, psi1, psi2_after, branch)


def log_sobolev_gap(u: RadialFunction, a, lambda1_lap, N) -> float:
    """Slack in the logarithmic Sobolev bound on the ball: the scaled
    curvature term plus the mass terms minus the logarithmic moment.
    Nonnegative (up to quadrature error) for every clamped profile and
    every a > 0."""
    if not (a > 0.0):
        raise ValueError("scale parameter must be positive")
    if not (lambda1_lap > 0.0):
        raise ValueError("first Laplace eigenvalue must be positive")
    _require_clamped(u)
    grid = u.grid
    x = u.values[: grid.n - 1]
    curvature = _bilap_pairing(grid, N, x, x)
    w = grid.ball_weights(N)
    mass = float(w @ (u.values * u.values))
    if mass <= 0.0:
        raise ValueError("gap needs a nonzero profile")
    log_moment = float(w @ _sq_log_sq(u.values))
    return (
        a * a / (math.pi * lambda1_lap) * curvature
        + (math.log(mass) - N * (1.0 + math.log(a))) * mass
        - log_moment
    )


def poincare_bilap_gap(u: RadialFunction, lambda1_lap, N) -> float:
    """Slack in the gradient-versus-curvature bound on the ball: the
    curvature quadratic form divided by the first Laplace eigenvalue,
    minus the quadrature of the squared radial derivative.

    Both sides carry their own O(h^2) discretization error, so for a
    profile close to the Laplace ground state the slack can dip
    slightly negative; on generic profiles the continuum margin
    dominates by orders of magnitude."""
    if not (lambda1_lap > 0.0):
        raise ValueError("first Laplace eigenvalue must be positive")
    _require_clamped(u)
    grid = u.grid
    x = u.values[: grid.n - 1]
    curvature = _bilap_pairing(grid, N, x, x)
    du = radial_derivative(u)
    grad_sq = quad_ball(RadialFunction(grid, du.values * du.values), N)
    return curvature / lambda1_lap - grad_sq


# ------------------------------------------------------ inequalities


@dataclass(frozen=True)
class InequalityCheck:
    label: str
    sup_ratio: float     # largest observed lhs/rhs, must stay <= 1
    argmax: float        # where the ratio peaks
    equality_at: float   # analytic maximizer (nan when interior-free)


def _refine_argmax(fn, lo, hi):
    res = minimize_scalar(
        lambda t: -fn(t), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-9},
    )
    return float(res.x)


def _sup_check(label, fn, grid_pts, equality_at):
    vals = fn(grid_pts)
    k = int(np.argmax(vals))
    lo = grid_pts[max(k - 1, 0)]
    hi = grid_pts[min(k + 1, len(grid_pts) - 1)]
    argmax = _refine_argmax(lambda t: float(fn(np.asarray([t]))[0]), lo, hi)
    sup_ratio = max(float(vals[k]), float(fn(np.asarray([argmax]))[0]))
    if sup_ratio > 1.0 + 1e-9:
        raise NumericsError(f"{label}: bound violated, ratio {sup_ratio!r}")
    return InequalityCheck(label, sup_ratio, argmax, equality_at)


def elementary_inequalities(samples=20001):
    """Grid verification of the three elementary logarithmic bounds.

    Returns one check per bound: |t ln t| <= 1/e on (0, 1], the decay
    bound ln t / t^sigma <= 1/(sigma e) for several sigma, and the
    two-sided bound |ln t| <= C (t^alpha + t^-delta) with
    C = 1/(e min(alpha, delta)).  A violation raises; the report
    records how close each bound comes to equality and where.
    """
    checks = []

    ts = np.geomspace(1e-12, 1.0, samples)
    checks.append(
        _sup_check(
            "t_log_t_on_unit_interval",
            lambda t: np.abs(t * np.log(t)) * math.e,
            ts,
            equality_at=1.0 / math.e,
        )
    )

    for sigma in (0.25, 0.5, 1.0, 2.0):
        ts = np.geomspace(1.0, math.exp(1.0 / sigma) * 1e4, samples)
        checks.append(
            _sup_check(
                f"log_over_power_sigma_{sigma}",
                lambda t, s=sigma: np.log(t) * (s * math.e) / t**s,
                ts,
                equality_at=math.exp(1.0 / sigma),
            )
        )

    for alpha, delta in ((1.0, 1.0), (0.25, 0.5), (2.0, 0.5)):
        const = 1.0 / (math.e * min(alpha, delta))
        ts = np.geomspace(1e-6, 1e6, samples)
        checks.append(
            _sup_check(
                f"abs_log_two_sided_alpha_{alpha}_delta_{delta}",
                lambda t, a=alpha, d=delta, c=const: np.abs(np.log(t))
                / (c * (t**a + t**-d)),
                ts,
                equality_at=math.nan,
            )
        )

    return checks
