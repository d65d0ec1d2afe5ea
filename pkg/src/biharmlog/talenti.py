"""Truncated concentration bubbles and their small-parameter behavior.

The extremal family C_N eps^((N-4)/2) (eps^2 + r^2)^(-(N-4)/2), cut off
smoothly at radius rho, concentrates at the origin as eps shrinks.  Its
curvature and critical norms approach the Sobolev power while the mass
and logarithmic moment vanish at dimension-dependent rates, and those
rates carry the sharp constants that the existence analysis needs.
This module builds the profiles on radial grids, computes the four
norms to quadrature accuracy (analytic derivatives throughout: the
eps^-2 curvature scale at the core forbids numerical differentiation),
and packages the predicted leading terms so tests and the CLI can
regress measured norms against them.

Dimension regimes differ in which terms dominate:

* N >= 9: mass ~ eps^4, log moment ~ eps^4 ln(1/eps), both with the
  whole-space constant of the untruncated bubble.
* N = 8: mass picks up an extra logarithm, and the log moment is only
  known up to a two-sided band whose width is set by the cut-off radius.
* N = 5, 6, 7: the cut-off region dominates; constants involve a moment
  of the cut-off itself, and the log moment is negative at leading
  order since the profile is small where its mass lives.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.optimize import minimize_scalar

from .constants import (
    Params,
    critical_exponent,
    sobolev_pow,
    sphere_area,
    talenti_constant,
    talenti_constant_sq,
)
from .discretization import RadialFunction, RadialGrid
from .errors import NumericsError
from .functional import FiberScalars, psi_value
from .quadrature import edge_panels, gauss_panels, panel_nodes

__all__ = [
    "TalentiSpec",
    "NormBundle",
    "VerifyCase",
    "Prediction",
    "FitField",
    "FitRecord",
    "cutoff_profile",
    "cutoff_derivatives",
    "bubble",
    "bubble_radial_derivative",
    "bubble_laplacian",
    "talenti_profile",
    "norm_bundle",
    "whole_space_crit",
    "j_constant",
    "phi_moment",
    "predict",
    "fit_coefficients",
    "loglog_slope",
    "ray_scalars",
    "sup_along_ray",
]


@dataclass(frozen=True)
class TalentiSpec:
    """Concentration parameter, cut-off radius, and dimension."""

    eps: float
    rho: float
    N: int

    def __post_init__(self):
        if not isinstance(self.N, int) or self.N < 5:
            raise ValueError("dimension must be an integer >= 5")
        if not (self.eps > 0.0 and math.isfinite(self.eps)):
            raise ValueError("concentration parameter must be positive")
        if not (self.rho > 0.0 and math.isfinite(self.rho)):
            raise ValueError("cut-off radius must be positive")
        if not (self.eps < self.rho):
            raise ValueError("concentration scale must sit inside the cut-off")


@dataclass(frozen=True)
class NormBundle:
    """The four integrals of one truncated bubble: squared natural norm,
    squared mass, critical power, and logarithmic moment."""

    h2: float
    l2: float
    crit: float
    logmom: float

    def __post_init__(self):
        vals = (self.h2, self.l2, self.crit, self.logmom)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("norms must be finite")
        if not (self.h2 > 0.0 and self.l2 > 0.0 and self.crit > 0.0):
            raise ValueError("norms must be positive")


# ------------------------------------------------------------- cut-off


def cutoff_profile(r, rho):
    """Radial C-infinity cut-off: 1 on [0, rho], 0 on [2 rho, inf).

    On the bridge the value is h(1-s)/(h(1-s)+h(s)) with s = (r-rho)/rho
    and h(t) = exp(-1/t), which collapses to a logistic in
    1/(1-s) - 1/s.
    """
    r = np.asarray(r, dtype=float)
    s = (r - rho) / rho
    out = np.ones_like(s)
    out[s >= 1.0] = 0.0
    mid = (s > 0.0) & (s < 1.0)
    sm = s[mid]
    out[mid] = expit(-(1.0 / (1.0 - sm) - 1.0 / sm))
    return out


def cutoff_derivatives(r, rho):
    """(phi, phi', phi'') with analytic radial derivatives.

    The bridge derivatives combine the logistic chain rule with the
    rational inner function; the exponentially small logistic factor
    w(1-w) tames the polynomial blow-up of the inner derivatives at the
    flat ends, so no clipping is needed for s strictly inside (0, 1).
    """
    r = np.asarray(r, dtype=float)
    s = (r - rho) / rho
    phi = np.ones_like(s)
    d1 = np.zeros_like(s)
    d2 = np.zeros_like(s)
    phi[s >= 1.0] = 0.0
    mid = (s > 0.0) & (s < 1.0)
    sm = s[mid]
    om = 1.0 - sm
    z = 1.0 / om - 1.0 / sm
    z1 = 1.0 / om**2 + 1.0 / sm**2
    z2 = 2.0 / om**3 - 2.0 / sm**3
    w = expit(-z)
    g = w * (1.0 - w)
    phi[mid] = w
    d1[mid] = -g * z1 / rho
    d2[mid] = g * ((1.0 - 2.0 * w) * z1 * z1 - z2) / (rho * rho)
    return phi, d1, d2


# -------------------------------------------------------------- bubble


def bubble(r, eps, N):
    """C_N eps^((N-4)/2) (eps^2 + r^2)^(-(N-4)/2)."""
    m = 0.5 * (N - 4)
    r = np.asarray(r, dtype=float)
    return talenti_constant(N) * eps**m * (eps * eps + r * r) ** (-m)


def bubble_radial_derivative(r, eps, N):
    m = 0.5 * (N - 4)
    r = np.asarray(r, dtype=float)
    return talenti_constant(N) * eps**m * (-2.0 * m) * r * (
        eps * eps + r * r
    ) ** (-m - 1.0)


def bubble_laplacian(r, eps, N):
    # closed form of u'' + (N-1) u'/r for the bubble: the cross terms
    # collapse to -(N-4) C (N eps^2 + 2 r^2) (eps^2+r^2)^(-N/2) at eps=1
    m = 0.5 * (N - 4)
    r = np.asarray(r, dtype=float)
    return talenti_constant(N) * eps**m * (-2.0 * m) * (
        N * eps * eps + 2.0 * r * r
    ) * (eps * eps + r * r) ** (-m - 2.0)


def talenti_profile(spec: TalentiSpec, grid: RadialGrid) -> RadialFunction:
    """Truncated bubble sampled on a radial grid.

    Requires the cut-off support to fit in the ball and at least 8 grid
    nodes inside the concentration core [0, eps].
    """
    if 2.0 * spec.rho > grid.R * (1.0 + 1e-12):
        raise ValueError("cut-off support 2 rho exceeds the ball radius")
    if int(np.count_nonzero(grid.nodes <= spec.eps)) < 8:
        raise ValueError("grid too coarse to resolve the concentration core")
    vals = cutoff_profile(grid.nodes, spec.rho) * bubble(grid.nodes, spec.eps, spec.N)
    return RadialFunction(grid, vals)


# ---------------------------------------------------------- quadrature


def _sq_log_sq(v):
    # v^2 ln v^2 as 2 v^2 ln|v|: v^2 may underflow to 0 for nonzero v
    # (deep in the cut-off tail) and ln|v| stays finite there, so the
    # product degrades to an exact 0 instead of 0 * (-inf)
    out = np.zeros_like(v)
    nz = v != 0.0
    out[nz] = 2.0 * (v[nz] * v[nz]) * np.log(np.abs(v[nz]))
    return out


def _bundle_at(spec: TalentiSpec, panels, order):
    N = spec.N
    area = sphere_area(N)
    q = critical_exponent(N)
    # core [0, rho] under r = eps sinh(s): resolves the eps-scale and
    # turns the algebraic peak into a smooth integrand
    s_max = math.asinh(spec.rho / spec.eps)
    s, ws = panel_nodes(0.0, s_max, panels, order)
    rc = spec.eps * np.sinh(s)
    wc = ws * spec.eps * np.cosh(s)
    # bridge [rho, 2 rho]: everything is eps-free and smooth
    rb, wb = panel_nodes(spec.rho, 2.0 * spec.rho, panels, order)

    uc = bubble(rc, spec.eps, N)
    lap_c = bubble_laplacian(rc, spec.eps, N)
    phi, p1, p2 = cutoff_derivatives(rb, spec.rho)
    ub = phi * bubble(rb, spec.eps, N)
    lap_b = (
        phi * bubble_laplacian(rb, spec.eps, N)
        + 2.0 * p1 * bubble_radial_derivative(rb, spec.eps, N)
        + bubble(rb, spec.eps, N) * (p2 + (N - 1.0) / rb * p1)
    )

    jc = rc ** (N - 1)
    jb = rb ** (N - 1)

    def both(fc, fb):
        return area * (float(np.dot(wc, fc * jc)) + float(np.dot(wb, fb * jb)))

    return NormBundle(
        h2=both(lap_c * lap_c, lap_b * lap_b),
        l2=both(uc * uc, ub * ub),
        crit=both(uc**q, ub**q),
        logmom=both(_sq_log_sq(uc), _sq_log_sq(ub)),
    )


def norm_bundle(spec: TalentiSpec, panels=96, order=12) -> NormBundle:
    """All four norms by composite Gauss quadrature, with a refinement
    doubling as the error estimate (> 1e-8 relative drift raises)."""
    coarse = _bundle_at(spec, panels, order)
    fine = _bundle_at(spec, 2 * panels, order)
    for name in ("h2", "l2", "crit", "logmom"):
        a = getattr(coarse, name)
        b = getattr(fine, name)
        if abs(a - b) > 1e-8 * (1.0 + abs(b)):
            raise NumericsError(
                f"{name} quadrature drifted {abs(a - b):.3e} between refinements"
            )
    return fine


def whole_space_crit(eps, N, r_max=1e3, panels=220, order=14):
    """Critical-power integral of the untruncated bubble over all of
    space.  Scale invariance makes the exact value eps-independent; the
    quadrature mesh here is deliberately eps-independent too, so
    agreement across eps is a real check of the computation."""
    if not (eps > 0.0 and math.isfinite(eps)):
        raise ValueError("concentration parameter must be positive")
    if not eps < 0.01 * r_max:
        raise ValueError("truncation radius must dwarf the core")
    q = critical_exponent(N)
    edges = np.concatenate(([0.0], np.geomspace(1e-8 * r_max, r_max, panels)))
    r, w = edge_panels(edges, order)
    val = sphere_area(N) * float(np.dot(w, bubble(r, eps, N) ** q * r ** (N - 1)))
    # integrand ~ C^q eps^N r^(-N-1) beyond r_max
    tail = sphere_area(N) * talenti_constant(N) ** q * eps**N / (N * r_max**N)
    return val + tail


def j_constant(N):
    """Whole-space integral of (1+|y|^2)^(4-N), finite for N >= 9;
    radial reduction gives a Beta value."""
    if not isinstance(N, int) or N < 9:
        raise ValueError("the integral diverges below dimension 9")
    half_beta = 0.5 * math.exp(
        math.lgamma(N / 2.0) + math.lgamma((N - 8) / 2.0) - math.lgamma(N - 4.0)
    )
    return sphere_area(N) * half_beta


def phi_moment(rho, N):
    """Cut-off moment: integral of phi^2 r^(7-N) over [0, 2 rho].  Only
    the low dimensions 5, 6, 7 use it; phi == 1 turns the core part
    into the power integral rho^(8-N)/(8-N)."""
    if N not in (5, 6, 7):
        raise ValueError("cut-off moment only enters dimensions 5, 6, 7")
    if not (rho > 0.0 and math.isfinite(rho)):
        raise ValueError("cut-off radius must be positive")
    core = rho ** (8 - N) / (8 - N)
    bridge = gauss_panels(
        lambda r: cutoff_profile(r, rho) ** 2 * r ** float(7 - N),
        rho,
        2.0 * rho,
        panels=64,
        order=12,
    )
    return core + bridge


# ---------------------------------------------------------- predictions


class VerifyCase(enum.Enum):
    NORMS = "norms"
    HIGH_DIM = "high-dim"
    DIM8 = "dim8"
    LOW_DIM = "low-dim"


@dataclass(frozen=True)
class Prediction:
    """Leading-term data for one verification case.  Unused fields stay
    None; coefficient fields refer to the leading basis function of the
    matching fit model (see fit_coefficients)."""

    case: VerifyCase
    h2_leading: float = None
    h2_remainder_order: float = None
    crit_leading: float = None
    crit_remainder_order: float = None
    l2_coeff: float = None
    logmom_coeff: float = None
    logmom_bracket: tuple = None


def predict(spec: TalentiSpec, case: VerifyCase) -> Prediction:
    """Predicted leading behavior of the bundle entries as eps -> 0.

    norms: curvature and critical norms approach the Sobolev power,
    with remainder exponents N-4 and N.  high-dim (N >= 9): mass
    coefficient on eps^4 and log-moment coefficient on eps^4 ln(1/eps).
    dim8: mass coefficient on eps^4 ln(1/eps) plus the two-sided
    log-moment band evaluated at (eps, rho).  low-dim (N = 5, 6, 7):
    coefficients on eps^(N-4) carrying the cut-off moment; the
    log-moment leading coefficient is negative.
    """
    N = spec.N
    if case is VerifyCase.NORMS:
        s_pow = sobolev_pow(N)
        return Prediction(
            case,
            h2_leading=s_pow,
            h2_remainder_order=float(N - 4),
            crit_leading=s_pow,
            crit_remainder_order=float(N),
        )
    if case is VerifyCase.HIGH_DIM:
        if N < 9:
            raise ValueError("high-dim case needs N >= 9")
        c2j = talenti_constant_sq(N) * j_constant(N)
        return Prediction(case, l2_coeff=c2j, logmom_coeff=(N - 4.0) * c2j)
    if case is VerifyCase.DIM8:
        if N != 8:
            raise ValueError("dim8 case needs N = 8")
        lead = talenti_constant_sq(8) * sphere_area(8)
        e2 = spec.eps**2
        r2 = spec.rho**2
        base = lead * spec.eps**4 * math.log(1.0 / spec.eps)
        lower = base * math.log(
            1920.0 * (e2 + r2) ** 2 / (math.exp(47.0 / 3.0) * (e2 + 4.0 * r2) ** 4)
        )
        upper = base * math.log(
            1920.0 * math.exp(37.0 / 3.0) * (e2 + 4.0 * r2) ** 2 / (e2 + r2) ** 4
        )
        return Prediction(case, l2_coeff=lead, logmom_bracket=(lower, upper))
    if case is VerifyCase.LOW_DIM:
        if not 5 <= N <= 7:
            raise ValueError("low-dim case needs N in {5, 6, 7}")
        lead = talenti_constant_sq(N) * sphere_area(N) * phi_moment(spec.rho, N)
        return Prediction(case, l2_coeff=lead, logmom_coeff=-(N - 4.0) * lead)
    raise ValueError(f"unknown case {case!r}")


# ----------------------------------------------------------------- fits


class FitField(enum.Enum):
    L2 = "l2"
    LOGMOM = "logmom"


@dataclass(frozen=True)
class FitRecord:
    field: FitField
    basis: tuple
    coefficients: tuple
    residual: float  # |residual| / |data|
    cond: float


def _fit_basis(field: FitField, N):
    e4 = ("eps^4", lambda e: e**4)
    e4log = ("eps^4 log(1/eps)", lambda e: e**4 * np.log(1.0 / e))
    em4 = (f"eps^{N - 4}", lambda e: e ** (N - 4.0))
    em3 = (f"eps^{N - 3}", lambda e: e ** (N - 3.0))
    em4log = (
        f"eps^{N - 4} log(1/eps)",
        lambda e: e ** (N - 4.0) * np.log(1.0 / e),
    )
    if N == 8:
        return (e4log, e4)
    if N >= 9:
        return (e4, em4) if field is FitField.L2 else (e4log, e4)
    return (em4, em3) if field is FitField.L2 else (em4log, em4)


def fit_coefficients(samples, field: FitField, N) -> FitRecord:
    """Least squares in the dimension-appropriate two-term basis,
    leading term first.  Columns are normalized before solving; the
    condition number of the normalized design matrix guards against a
    too-narrow eps range."""
    if len(samples) < 6:
        raise ValueError("need at least 6 samples")
    eps = np.asarray([e for e, _ in samples], dtype=float)
    if eps.max() < 10.0 * eps.min() * (1.0 - 1e-12):
        raise ValueError("samples must span at least a decade")
    y = np.asarray([getattr(b, field.value) for _, b in samples], dtype=float)
    basis = _fit_basis(field, N)
    A = np.column_stack([fncol(eps) for _, fncol in basis])
    col = np.linalg.norm(A, axis=0)
    As = A / col
    c_s, _, rank, sv = np.linalg.lstsq(As, y, rcond=None)
    cond = float(sv[0] / sv[-1])
    if rank < len(basis) or cond > 1e10:
        raise NumericsError(f"fit basis ill-conditioned (cond {cond:.2e})")
    resid = float(np.linalg.norm(As @ c_s - y) / np.linalg.norm(y))
    return FitRecord(
        field,
        tuple(name for name, _ in basis),
        tuple(float(c) for c in c_s / col),
        resid,
        cond,
    )


def loglog_slope(eps_values, deviations):
    """Slope of ln|deviation| against ln(eps): the observed decay rate."""
    eps_values = np.asarray(eps_values, dtype=float)
    dev = np.abs(np.asarray(deviations, dtype=float))
    if eps_values.size < 2:
        raise ValueError("need at least two points for a slope")
    if np.any(dev == 0.0):
        raise ValueError("zero deviation breaks the log fit")
    return float(np.polyfit(np.log(eps_values), np.log(dev), 1)[0])


# ------------------------------------------------------------ sup check


SUP_SCAN = (1e-3, 1e3)
SUP_SCAN_POINTS = 241


def ray_scalars(spec: TalentiSpec, panels=96, order=12) -> FiberScalars:
    """Fibering scalars of the truncated bubble from the quadrature
    bundle rather than a grid pairing.

    The distinction matters: the logarithmic gain that pushes the ray
    maximum below the compactness threshold is of order
    eps^4 ln(1/eps) relative to the threshold itself, which at usable
    eps is ~1e-7.  A finite-difference curvature carries O(h^2) noise
    around 1e-5, so a grid assembly would drown exactly the effect this
    computation exists to measure."""
    b = norm_bundle(spec, panels=panels, order=order)
    return FiberScalars(
        curvature=b.h2,
        mass=b.l2,
        log_moment=b.logmom,
        crit=b.crit,
        p_crit=critical_exponent(spec.N),
    )


def sup_along_ray(spec: TalentiSpec, p: Params, panels=96, order=12):
    """Maximum of the energy along the ray through the truncated bubble
    and its location, by golden-section refinement of a log-spaced scan.
    Raises if the maximum sits on the scan boundary."""
    if p.N != spec.N:
        raise ValueError("parameter dimension disagrees with the bubble")
    if 2.0 * spec.rho > p.R * (1.0 + 1e-12):
        raise ValueError("cut-off support 2 rho exceeds the ball radius")
    s = ray_scalars(spec, panels=panels, order=order)
    ts = np.geomspace(SUP_SCAN[0], SUP_SCAN[1], SUP_SCAN_POINTS)
    vals = np.asarray([psi_value(s, p, t) for t in ts])
    if not np.all(np.isfinite(vals)):
        raise NumericsError("ray energies overflowed on the scan range")
    k = int(np.argmax(vals))
    if k == 0 or k == SUP_SCAN_POINTS - 1:
        raise NumericsError("ray maximum hit the scan boundary")
    res = minimize_scalar(
        lambda t: -psi_value(s, p, t),
        bracket=(ts[k - 1], ts[k], ts[k + 1]),
        method="golden",
        options={"xtol": 1e-12},
    )
    t_eps = float(res.x)
    return psi_value(s, p, t_eps), t_eps
