"""Parameter-plane classification, existence/nonexistence verdicts, and
the mountain-pass floor geometry."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from biharmlog.constants import Constants, Params, critical_exponent
from biharmlog.discretization import compute_constants
from biharmlog.errors import NumericsError
from biharmlog.regions import (
    ExistsHint,
    Region,
    Verdict,
    classify,
    existence_verdict,
    mp_geometry,
    nonexistence_check,
    threshold_report,
)


@pytest.fixture(scope="module")
def consts():
    return {N: compute_constants(Params(N, 0.0, 1.0, 1.0)) for N in (5, 6, 7, 8, 9)}


# -------------------------------------------------------------- classify


def test_positive_mu_is_unconditional(consts):
    for lam in (-7.0, 0.0, 1e4):
        assert classify(Params(5, lam, 1.0, 1.0), consts[5]).region is Region.A
    assert classify(Params(9, 0.0, 1e-9, 1.0), consts[9]).region is Region.A


def test_zero_mu_is_out(consts):
    assert classify(Params(5, 1.0, 0.0, 1.0), consts[5]).region is Region.NONE


def test_lam_zero_collapses_the_eigenvalue_route(consts):
    c = consts[5]
    bound = 4.0 / 5.0 * c.sobolev_pow / c.volume
    assert classify(Params(5, 0.0, -0.9 * bound, 1.0), c).region is Region.BAND_C
    assert classify(Params(5, 0.0, -1.1 * bound, 1.0), c).region is Region.NONE


def test_very_negative_mu_is_out(consts):
    assert classify(Params(5, 10.0, -1e12, 1.0), consts[5]).region is Region.NONE


def test_negative_lam_leaves_only_the_log_route(consts):
    v = classify(Params(7, -50.0, -1.0, 1.0), consts[7])
    assert v.region is Region.C


def test_huge_lam_ratio_does_not_overflow(consts):
    v = classify(Params(9, 500.0, -0.5, 1.0), consts[9])
    assert v.region in (Region.B, Region.NONE)
    assert all(math.isnan(val) is False for _, val in v.details)


def test_classify_rejects_mismatched_constants(consts):
    with pytest.raises(ValueError):
        classify(Params(6, 0.0, 1.0, 1.0), consts[5])
    with pytest.raises(ValueError):
        classify(Params(5, 0.0, 1.0, 2.0), consts[5])


def test_classify_scales_through_constants_only():
    big = Params(5, 0.0, -300.0, 1.0)
    small = Params(5, 0.0, -300.0, 0.5)
    assert classify(big, compute_constants(big)).region is Region.NONE
    assert classify(small, compute_constants(small)).region is Region.BAND_C


def test_details_carry_named_margins(consts):
    v = classify(Params(5, 100.0, -20.0, 1.0), consts[5])
    names = [name for name, _ in v.details]
    assert any("eigenvalue route" in n for n in names)
    assert any("log-weight route" in n for n in names)


# ---------------------------------------------------------- nonexistence


def test_nonexistence_unit_scale_example(consts):
    # -mu (N-4)/4 = 1 kills the logarithm
    lam1 = consts[5].lambda1
    fires, f_min, t_tilde = nonexistence_check(Params(5, lam1, -4.0, 1.0), lam1)
    assert fires
    assert t_tilde == 1.0
    assert f_min == pytest.approx(1.0, abs=1e-12)


def test_nonexistence_boundary_example(consts):
    # -mu (N-4)/4 = e makes the two leading terms cancel exactly
    lam1 = consts[5].lambda1
    fires, f_min, _ = nonexistence_check(Params(5, lam1, -4.0 * math.e, 1.0), lam1)
    assert fires
    assert f_min == 0.0


def test_nonexistence_silent_for_nonnegative_mu(consts):
    fires, f_min, t_tilde = nonexistence_check(Params(5, 0.0, 1.0, 1.0), 20.0)
    assert not fires
    assert math.isnan(f_min) and math.isnan(t_tilde)


def test_nonexistence_rejects_bad_eigenvalue():
    with pytest.raises(ValueError):
        nonexistence_check(Params(5, 0.0, -1.0, 1.0), -3.0)


def test_nonexistence_matches_grid_minimum():
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(5, 13))
        mu = -float(np.exp(rng.uniform(np.log(1e-3), np.log(1e3))))
        lam = float(rng.uniform(-50.0, 50.0))
        lam1 = float(np.exp(rng.uniform(0.0, 8.0)))
        _, f_min, _ = nonexistence_check(Params(N, lam, mu, 1.0), lam1)
        q = critical_exponent(N)

        def f(t):
            return lam - lam1 + mu * np.log(t * t) + t ** (q - 2.0)

        ts = np.geomspace(1e-6, 1e6, 10001)
        k = int(np.argmin(f(ts)))
        res = minimize_scalar(
            f,
            bracket=(ts[k - 1], ts[k], ts[k + 1]),
            method="golden",
            options={"xtol": 1e-14},
        )
        worst = max(worst, abs(res.fun - f_min) / (1.0 + abs(f_min)))
    assert worst < 1e-8


# ------------------------------------------------------------- existence


def test_existence_high_dimension_positive_mu(consts):
    v = existence_verdict(Params(9, 0.0, 1.0, 1.0), consts[9])
    assert v.region is Region.A
    assert v.exists_hint is ExistsHint.YES


def test_existence_low_dimension_negative_mu(consts):
    v = existence_verdict(Params(6, 100.0, -100.0, 1.0), consts[6])
    assert v.region in (Region.B, Region.BAND_C)
    assert v.exists_hint is ExistsHint.YES


def test_dimension8_small_domain_stays_unknown(consts):
    v = existence_verdict(Params(8, 0.0, -10.0, 1.0), consts[8])
    assert v.region in (Region.B, Region.C, Region.BAND_C)
    assert v.exists_hint is ExistsHint.UNKNOWN
    assert v.n8_condition is not None and v.n8_condition >= 1.0
    assert any("domain size margin" == name for name, _ in v.details)


def test_dimension8_positive_mu_needs_no_domain_condition(consts):
    v = existence_verdict(Params(8, 0.0, 1.0, 1.0), consts[8])
    assert v.exists_hint is ExistsHint.YES
    assert v.n8_condition is None


def test_low_dimension_positive_mu_is_open(consts):
    # the high-dimension route needs N >= 8, the low-dimension route
    # needs negative mu, so nothing applies
    v = existence_verdict(Params(5, 0.0, 1.0, 1.0), consts[5])
    assert v.exists_hint is ExistsHint.UNKNOWN


def test_nonexistence_fires_through_verdict(consts):
    lam1 = consts[5].lambda1
    v = existence_verdict(Params(5, lam1 + 5.0, -4.0, 1.0), consts[5])
    assert v.exists_hint is ExistsHint.NO_POSITIVE
    assert v.nonexist_value is not None and v.nonexist_value >= 0.0


def test_collision_guard_on_inconsistent_inputs():
    # a fabricated tiny eigenvalue pushes the nonexistence test into a
    # region the existence theorem also claims
    p = Params(5, 0.1 - 1e-9, -1e-9, 1.0)
    c_fake = Constants.derive(p, lambda1=0.1, lambda1_lap=1.0)
    with pytest.raises(NumericsError):
        existence_verdict(p, c_fake)


def test_sweep_verdicts_never_collide(consts):
    for N in (5, 8):
        c = consts[N]
        lams = np.linspace(0.0, 1.2 * c.lambda1, 12)
        mus = np.concatenate(
            [-np.geomspace(1e3, 1e-2, 6), np.geomspace(1e-2, 1e3, 6)]
        )
        hints = {ExistsHint.YES: 0, ExistsHint.NO_POSITIVE: 0, ExistsHint.UNKNOWN: 0}
        for lam in lams:
            for mu in mus:
                v = existence_verdict(Params(N, float(lam), float(mu), 1.0), c)
                hints[v.exists_hint] += 1
        # the guard inside existence_verdict would have raised on any
        # collision; both decisive hints must actually occur
        assert hints[ExistsHint.YES] > 0
        assert hints[ExistsHint.NO_POSITIVE] > 0


# -------------------------------------------------------------- geometry


def _floor_fn(p, c, route):
    q = c.p_crit
    s_pow_q = c.sobolev_pow ** (2.0 * q / p.N)  # Sobolev ratio to the q/2
    if route == "eigen":
        kappa = (c.lambda1 - p.lam) / c.lambda1
        const = 0.5 * p.mu * c.volume
    else:
        kappa = 1.0
        const = 0.5 * p.mu * math.exp(-p.lam / p.mu) * c.volume
    return lambda t: 0.5 * kappa * t * t - t**q / (q * s_pow_q) + const


@pytest.mark.parametrize(
    "N, lam, mu, route",
    [
        (5, 100.0, -20.0, "eigen"),
        (9, 500.0, -0.5, "eigen"),
        (7, -50.0, -1.0, "log"),
        (6, 0.0, -300.0, "eigen"),
    ],
)
def test_floor_matches_grid_maximum(consts, N, lam, mu, route):
    p = Params(N, lam, mu, 1.0)
    c = consts[N]
    r, beta = mp_geometry(p, c)
    assert beta > 0.0
    g = _floor_fn(p, c, route)
    ts = np.geomspace(1e-3 * r, 1e3 * r, 20001)
    k = int(np.argmax([g(t) for t in ts]))
    res = minimize_scalar(
        lambda t: -g(t),
        bracket=(ts[k - 1], ts[k], ts[k + 1]),
        method="golden",
        options={"xtol": 1e-13},
    )
    assert abs(-res.fun - beta) / abs(beta) < 1e-8
    assert abs(res.x - r) / r < 1e-6


def test_geometry_refuses_outside_negative_mu_regions(consts):
    with pytest.raises(ValueError):
        mp_geometry(Params(5, 0.0, 1.0, 1.0), consts[5])
    with pytest.raises(ValueError):
        mp_geometry(Params(5, 10.0, -1e12, 1.0), consts[5])


def test_log_route_floor_equals_classify_margin(consts):
    p = Params(7, -50.0, -1.0, 1.0)
    c = consts[7]
    _, beta = mp_geometry(p, c)
    v = classify(p, c)
    margin = dict(v.details)["level margin, log-weight route"]
    assert beta == margin


# -------------------------------------------------------------- threshold


def test_threshold_report_delegates_and_reports_slack(consts):
    c = consts[5]
    assert threshold_report(Params(5, 0.0, 1.0, 1.0), c) == c.threshold

    class FakeSolution:
        energy = 10.0

    slack = threshold_report(Params(5, 0.0, 1.0, 1.0), c, FakeSolution())
    assert slack == pytest.approx(c.threshold - 10.0, rel=1e-15)
    assert threshold_report(Params(5, 0.0, 1.0, 1.0), c, 0.0) == c.threshold


def test_verdict_defaults():
    v = Verdict(Region.NONE)
    assert v.exists_hint is ExistsHint.UNKNOWN
    assert v.n8_condition is None and v.nonexist_value is None
    assert v.details == ()
