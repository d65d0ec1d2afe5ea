"""Parameter-plane classification and the existence/nonexistence tests.

The admissible set splits by the sign of the logarithmic coefficient.
Positive mu is unconditionally admissible.  Negative mu survives only
while the mountain-pass level stays positive, and that can be arranged
two ways: depress the quadratic term by the eigenvalue ratio (needs
lam inside the eigenvalue window), or absorb lam into the logarithm at
the price of an exponential weight on the volume term.  Both margins
are reported; dimension 8 additionally needs the domain large enough
for the truncated-bubble estimates to close.

The nonexistence test pairs a putative positive solution against the
first plate eigenfunction; positivity of the resulting scalar function
of one variable at its minimum rules solutions out.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .constants import Constants, Params, ball_volume, critical_exponent
from .errors import NumericsError

__all__ = [
    "Region",
    "ExistsHint",
    "Verdict",
    "classify",
    "existence_verdict",
    "nonexistence_check",
    "mp_geometry",
    "threshold_report",
]

# strict inequalities: margins this close to zero (relative to the term
# scale) are treated as failed, with a boundary note
BOUNDARY_BAND = 1e-12


class Region(enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    BAND_C = "BandC"
    NONE = "None"


class ExistsHint(enum.Enum):
    YES = "Yes"
    NO_POSITIVE = "NoPositive"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Verdict:
    region: Region
    exists_hint: ExistsHint = ExistsHint.UNKNOWN
    n8_condition: float = None
    nonexist_value: float = None
    details: tuple = ()


def _require_consistent(p: Params, c: Constants):
    if abs(c.p_crit - critical_exponent(p.N)) > 1e-12:
        raise ValueError("constants were derived for a different dimension")
    vol = ball_volume(p.N, p.R)
    if abs(c.volume - vol) > 1e-12 * vol:
        raise ValueError("constants were derived for a different radius")


def _level_b(p: Params, c: Constants):
    kappa = (c.lambda1 - p.lam) / c.lambda1
    return (
        2.0 / p.N * kappa ** (p.N / 4.0) * c.sobolev_pow + 0.5 * p.mu * c.volume,
        2.0 / p.N * kappa ** (p.N / 4.0) * c.sobolev_pow + 0.5 * abs(p.mu) * c.volume,
    )


def _level_c(p: Params, c: Constants):
    x = -p.lam / p.mu
    if x > 700.0:
        # the weighted volume term dwarfs the Sobolev term long before
        # exp overflows; the sign of mu decides, and here mu < 0
        return -math.inf, math.inf
    weight = math.exp(x)
    return (
        2.0 / p.N * c.sobolev_pow + 0.5 * p.mu * weight * c.volume,
        2.0 / p.N * c.sobolev_pow + 0.5 * abs(p.mu) * weight * c.volume,
    )


def classify(p: Params, c: Constants) -> Verdict:
    """Assign (lam, mu) to its admissible region.

    Membership inequalities are strict; a margin inside the boundary
    band counts as out, flagged in the details."""
    _require_consistent(p, c)
    if p.mu > 0.0:
        return Verdict(Region.A, details=(("mu sign", p.mu),))
    if p.mu == 0.0:
        return Verdict(Region.NONE, details=(("mu sign", 0.0),))

    details = []
    in_b = False
    if 0.0 <= p.lam < c.lambda1:
        margin_b, scale_b = _level_b(p, c)
        if abs(margin_b) <= BOUNDARY_BAND * scale_b:
            details.append(("level margin, eigenvalue route (boundary)", margin_b))
        else:
            in_b = margin_b > 0.0
            details.append(("level margin, eigenvalue route", margin_b))
    else:
        details.append(("eigenvalue window", min(p.lam, c.lambda1 - p.lam)))

    margin_c, scale_c = _level_c(p, c)
    if math.isfinite(margin_c) and abs(margin_c) <= BOUNDARY_BAND * scale_c:
        in_c = False
        details.append(("level margin, log-weight route (boundary)", margin_c))
    else:
        in_c = margin_c > 0.0
        details.append(("level margin, log-weight route", margin_c))

    if in_b and in_c:
        region = Region.BAND_C
    elif in_b:
        region = Region.B
    elif in_c:
        region = Region.C
    else:
        region = Region.NONE
    return Verdict(region, details=tuple(details))


def nonexistence_check(p: Params, lambda1):
    """(fires, f_min, t_tilde) for the positive-solution obstruction.

    f(t) = lam - lambda1 + mu ln t^2 + t^(2**-2) is what pairing a
    positive solution with the plate ground state forces to vanish
    somewhere; a nonnegative minimum is a contradiction.  The minimum
    sits at t_tilde with the closed-form value below.  Meaningless for
    mu >= 0 (f is unbounded below), reported as a non-firing NaN."""
    if not (lambda1 > 0.0):
        raise ValueError("first plate eigenvalue must be positive")
    if p.mu >= 0.0:
        return False, math.nan, math.nan
    s = -p.mu * (p.N - 4.0) / 4.0
    t_tilde = s ** ((p.N - 4.0) / 8.0)
    f_min = s - s * math.log(s) + p.lam - lambda1
    return f_min >= 0.0, f_min, t_tilde


def existence_verdict(p: Params, c: Constants) -> Verdict:
    """Combine region membership, the dimension-8 domain condition, and
    the nonexistence test into one verdict.

    Raises NumericsError if the existence and nonexistence criteria
    ever fire together; they are disjoint by construction, so a
    collision means bad inputs or a broken implementation."""
    base = classify(p, c)
    details = list(base.details)
    in_bc = base.region in (Region.B, Region.C, Region.BAND_C)
    hint = ExistsHint.UNKNOWN
    n8 = None

    if p.N >= 8 and base.region is Region.A:
        hint = ExistsHint.YES
    elif p.N == 8 and in_bc:
        n8 = 25.0 * 1920.0 * math.exp(p.lam / p.mu + 34.0 / 3.0) / p.R**4
        details.append(("domain size margin", 1.0 - n8))
        if n8 < 1.0:
            hint = ExistsHint.YES
    elif 5 <= p.N <= 7 and in_bc:
        hint = ExistsHint.YES

    nonexist = None
    if p.mu < 0.0:
        fires, f_min, _ = nonexistence_check(p, c.lambda1)
        nonexist = f_min
        if fires:
            if hint is ExistsHint.YES:
                raise NumericsError(
                    "existence and nonexistence criteria fired together"
                )
            hint = ExistsHint.NO_POSITIVE

    return Verdict(base.region, hint, n8, nonexist, tuple(details))


def mp_geometry(p: Params, c: Constants):
    """Mountain-pass radius and floor level (r, beta): the energy is at
    least beta on the sphere of natural norm r.

    Uses the eigenvalue route when available (region B, or both), else
    the log-weight route; callers outside both regions get an error."""
    verdict = classify(p, c)
    if verdict.region in (Region.B, Region.BAND_C):
        kappa = (c.lambda1 - p.lam) / c.lambda1
        r = kappa ** ((p.N - 4.0) / 8.0) * math.sqrt(c.sobolev_pow)
        beta, _ = _level_b(p, c)
    elif verdict.region is Region.C:
        r = math.sqrt(c.sobolev_pow)
        beta, _ = _level_c(p, c)
    else:
        raise ValueError("mountain-pass floor needs a negative-mu region")
    return r, beta


def threshold_report(p: Params, c: Constants, solution=None) -> float:
    """Compactness threshold for these parameters; with a solution (or
    a bare energy value) supplied, the slack threshold - energy."""
    _require_consistent(p, c)
    if solution is None:
        return c.threshold
    energy = float(getattr(solution, "energy", solution))
    return c.threshold - energy
