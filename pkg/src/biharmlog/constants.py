"""Closed-form scalar constants for the clamped-plate critical problem.

The rest of the toolkit consumes a handful of scalars computed here:
the critical embedding exponent 2N/(N-4), the normalization constant of
the extremal bubble, unit-sphere areas and ball volumes, the best
Sobolev ratio raised to its natural power N/4, and the compactness
threshold derived from it.

The Sobolev power is computed along two independent routes (a Beta
closed form and a direct radial quadrature of the squared bubble
Laplacian) and the two must agree to 1e-6 relative; disagreement raises
instead of returning a number.

All functions are pure; concurrent sweep workers may call them freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import OracleMismatch
from .quadrature import gauss_panels

__all__ = [
    "Params",
    "Constants",
    "critical_exponent",
    "talenti_constant",
    "talenti_constant_sq",
    "sphere_area",
    "ball_volume",
    "sobolev_pow",
    "threshold_cs",
]


def _check_dimension(N):
    if int(N) != N or N < 5:
        raise ValueError(f"dimension must be an integer >= 5, got {N!r}")


@dataclass(frozen=True)
class Params:
    """Problem data: dimension N >= 5, linear coefficient lam, logarithmic
    coefficient mu, and the radius of the hosting ball."""

    N: int
    lam: float
    mu: float
    R: float = 1.0

    def __post_init__(self):
        _check_dimension(self.N)
        if not (self.R > 0.0) or not math.isfinite(self.R):
            raise ValueError("ball radius must be positive and finite")
        if not (math.isfinite(self.lam) and math.isfinite(self.mu)):
            raise ValueError("lam and mu must be finite")

    @property
    def p_crit(self):
        return critical_exponent(self.N)


@dataclass(frozen=True)
class Constants:
    """Derived scalars for one Params instance.

    lambda1 is the first clamped-plate eigenvalue on B_R, lambda1_lap
    the first Dirichlet Laplacian eigenvalue; both come from the
    discretization module (see discretization.compute_constants).
    """

    p_crit: float        # critical exponent 2N/(N-4)
    talenti: float       # bubble normalization [N(N-4)(N^2-4)]^((N-4)/8)
    omega: float         # area of the unit sphere in R^N
    volume: float        # |B_R|
    sobolev_pow: float   # best Sobolev ratio to the power N/4
    lambda1: float       # first clamped bilaplacian eigenvalue on B_R
    lambda1_lap: float   # first Dirichlet Laplacian eigenvalue on B_R
    threshold: float     # compactness threshold (2/N) * sobolev_pow

    @classmethod
    def derive(cls, p: Params, lambda1: float, lambda1_lap: float) -> "Constants":
        s_pow = sobolev_pow(p.N)
        return cls(
            p_crit=critical_exponent(p.N),
            talenti=talenti_constant(p.N),
            omega=sphere_area(p.N),
            volume=ball_volume(p.N, p.R),
            sobolev_pow=s_pow,
            lambda1=float(lambda1),
            lambda1_lap=float(lambda1_lap),
            threshold=threshold_cs(s_pow, p.N),
        )


def critical_exponent(N):
    """Largest exponent 2N/(N-4) for which the second-order Sobolev
    embedding into Lebesgue spaces holds on R^N."""
    _check_dimension(N)
    return 2.0 * N / (N - 4.0)


def _bubble_base(N):
    # integer so the squared constant stays exact for even (N-4)/4
    return N * (N - 4) * (N * N - 4)


def talenti_constant(N):
    """Normalization making the standard bubble solve the critical
    bilaplacian equation on R^N."""
    _check_dimension(N)
    return float(_bubble_base(N)) ** ((N - 4) / 8.0)


def talenti_constant_sq(N):
    """Square of talenti_constant, kept in exact integer arithmetic when
    the exponent (N-4)/4 is integral (N = 8 gives 8*4*60 = 1920 exactly)."""
    _check_dimension(N)
    return float(_bubble_base(N)) ** ((N - 4) / 4.0)


def sphere_area(N):
    """Surface area of the unit sphere in R^N, 2 pi^(N/2) / Gamma(N/2)."""
    if int(N) != N or N < 1:
        raise ValueError(f"sphere dimension must be a positive integer, got {N!r}")
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


def ball_volume(N, R):
    """Volume of the ball of radius R in R^N."""
    if not (R > 0.0):
        raise ValueError("radius must be positive")
    return sphere_area(N) * R ** N / N


def _bubble_crit_closed(N):
    # whole-space integral of the bubble to the critical power:
    # C_N^(2N/(N-4)) * (omega_N / 2) * B(N/2, N/2); the Talenti power
    # collapses to base^(N/4) exactly.
    base = float(_bubble_base(N))
    beta = math.exp(2.0 * math.lgamma(N / 2.0) - math.lgamma(float(N)))
    return base ** (N / 4.0) * 0.5 * sphere_area(N) * beta


def _bubble_curvature_quadrature(N):
    # direct radial quadrature of the squared bubble Laplacian with the
    # substitution r = sinh(s); cut where the integrand has dropped 16
    # decades below its peak, analytic tail appended.
    coef = (N - 4.0) ** 2 * talenti_constant_sq(N)

    def integrand(s):
        r = np.sinh(s)
        w = 1.0 + r * r
        lap_sq = coef * (2.0 * r * r + N) ** 2 * w ** (-float(N))
        return lap_sq * r ** (N - 1) * np.cosh(s)

    s_hi = 80.0 / (N - 4) + 12.0
    probe = np.linspace(0.0, s_hi, 4001)
    vals = integrand(probe)
    k_peak = int(np.argmax(vals))
    peak = vals[k_peak]
    past = np.nonzero(vals[k_peak:] < 1e-16 * peak)[0]
    s_cut = probe[k_peak + past[0]] if past.size else s_hi
    total = gauss_panels(integrand, 0.0, float(s_cut), panels=160, order=16)
    r_cut = math.sinh(float(s_cut))
    tail = 4.0 * (N - 4.0) * talenti_constant_sq(N) * r_cut ** (4 - N)
    return sphere_area(N) * (total + tail)


@lru_cache(maxsize=None)
def sobolev_pow(N):
    """Best Sobolev ratio raised to the power N/4.

    Computed two independent ways (Beta closed form and radial
    quadrature of the squared bubble Laplacian); raises OracleMismatch
    unless they agree to 1e-6 relative.  Returns the closed form.
    """
    _check_dimension(N)
    closed = _bubble_crit_closed(N)
    quad = _bubble_curvature_quadrature(N)
    rel = abs(closed - quad) / closed
    if rel > 1e-6:
        raise OracleMismatch(
            f"Sobolev power routes disagree at N={N}: closed={closed!r},"
            f" quadrature={quad!r} (rel {rel:.3e})"
        )
    return closed


def threshold_cs(s_pow, N):
    """Compactness threshold (2/N) * s_pow below which minimizing
    sequences stay precompact."""
    _check_dimension(N)
    if not (s_pow > 0.0):
        raise ValueError("sobolev power must be positive")
    return 2.0 * s_pow / N
