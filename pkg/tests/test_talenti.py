"""Truncated-bubble machinery: cut-off, closed forms, quadrature
bundles, asymptotic fits, and the ray-maximum threshold check."""

import math

import numpy as np
import pytest

from biharmlog.constants import (
    Params,
    ball_volume,
    critical_exponent,
    sobolev_pow,
    sphere_area,
    talenti_constant,
    talenti_constant_sq,
    threshold_cs,
)
from biharmlog.discretization import RadialFunction, RadialGrid, h2_norm
from biharmlog.errors import NumericsError
from biharmlog.quadrature import gauss_panels
from biharmlog.talenti import (
    FitField,
    NormBundle,
    Prediction,
    TalentiSpec,
    VerifyCase,
    bubble,
    bubble_laplacian,
    bubble_radial_derivative,
    cutoff_derivatives,
    cutoff_profile,
    fit_coefficients,
    j_constant,
    loglog_slope,
    norm_bundle,
    phi_moment,
    predict,
    ray_scalars,
    sup_along_ray,
    talenti_profile,
    whole_space_crit,
)


# ------------------------------------------------------------ validation


def test_spec_rejects_bad_fields():
    with pytest.raises(ValueError):
        TalentiSpec(1e-2, 0.25, 4)
    with pytest.raises(ValueError):
        TalentiSpec(1e-2, 0.25, 5.0)
    with pytest.raises(ValueError):
        TalentiSpec(-1e-2, 0.25, 5)
    with pytest.raises(ValueError):
        TalentiSpec(1e-2, -0.25, 5)
    with pytest.raises(ValueError):
        TalentiSpec(0.3, 0.25, 5)  # concentration scale outside cut-off


def test_bundle_rejects_bad_norms():
    with pytest.raises(ValueError):
        NormBundle(h2=float("nan"), l2=1.0, crit=1.0, logmom=0.0)
    with pytest.raises(ValueError):
        NormBundle(h2=-1.0, l2=1.0, crit=1.0, logmom=0.0)
    with pytest.raises(ValueError):
        NormBundle(h2=1.0, l2=0.0, crit=1.0, logmom=0.0)


# --------------------------------------------------------------- cut-off


def test_cutoff_plateau_bridge_and_tail():
    rho = 0.3
    r = np.array([0.0, 0.15, rho, 1.5 * rho, 2.0 * rho, 5.0])
    phi = cutoff_profile(r, rho)
    assert phi[0] == 1.0 and phi[1] == 1.0 and phi[2] == 1.0
    # the bridge midpoint is the symmetry point of the logistic
    assert phi[3] == pytest.approx(0.5, abs=1e-15)
    assert phi[4] == 0.0 and phi[5] == 0.0
    dense = cutoff_profile(np.linspace(rho, 2 * rho, 400), rho)
    assert np.all(dense <= 1.0) and np.all(dense >= 0.0)
    assert np.all(np.diff(dense) <= 0.0)


def test_cutoff_derivatives_match_finite_differences():
    rho = 0.3
    r = rho * (1.0 + np.array([0.2, 0.5, 0.8]))
    phi, d1, d2 = cutoff_derivatives(r, rho)
    assert np.array_equal(phi, cutoff_profile(r, rho))
    h = 1e-6
    fd1 = (cutoff_profile(r + h, rho) - cutoff_profile(r - h, rho)) / (2 * h)
    assert np.max(np.abs(fd1 - d1) / np.abs(d1)) < 1e-6
    h = 1e-4
    fd2 = (
        cutoff_profile(r + h, rho) - 2 * cutoff_profile(r, rho) + cutoff_profile(r - h, rho)
    ) / h**2
    # the midpoint second derivative vanishes by symmetry, so scale by
    # the largest magnitude instead of pointwise
    assert np.max(np.abs(fd2 - d2)) / np.max(np.abs(d2)) < 1e-3


def test_cutoff_derivatives_vanish_off_bridge():
    rho = 0.4
    r = np.array([0.0, 0.2, rho, 2 * rho, 1.5])
    _, d1, d2 = cutoff_derivatives(r, rho)
    assert np.all(d1 == 0.0) and np.all(d2 == 0.0)


# ---------------------------------------------------------------- bubble


def test_bubble_peak_and_dilation_covariance():
    for N in (5, 8, 11):
        assert bubble(0.0, 0.05, N) == pytest.approx(
            talenti_constant(N) * 0.05 ** (-(N - 4) / 2), rel=1e-14
        )
        r = np.geomspace(1e-3, 10.0, 40)
        eps = 0.07
        scaled = eps ** (-(N - 4) / 2) * bubble(r / eps, 1.0, N)
        assert np.allclose(bubble(r, eps, N), scaled, rtol=1e-13)


def test_bubble_laplacian_matches_unit_scale_formula():
    r = np.geomspace(1e-3, 50.0, 60)
    for N in (5, 8, 9):
        reference = (
            -(N - 4.0)
            * talenti_constant(N)
            * (2.0 * r * r + N)
            * (1.0 + r * r) ** (-N / 2.0)
        )
        assert np.allclose(bubble_laplacian(r, 1.0, N), reference, rtol=2e-15)


def test_bubble_laplacian_matches_finite_differences():
    N, eps = 9, 0.3
    r = np.array([0.05, 0.2, 0.9, 2.0])
    h = 1e-5
    up = bubble(r + h, eps, N)
    dn = bubble(r - h, eps, N)
    mid = bubble(r, eps, N)
    fd = (up - 2 * mid + dn) / h**2 + (N - 1) / r * (up - dn) / (2 * h)
    assert np.max(np.abs(fd - bubble_laplacian(r, eps, N)) / np.abs(fd)) < 1e-5


def test_bubble_radial_derivative_is_radial_gradient():
    N, eps = 6, 0.2
    r = np.geomspace(1e-2, 3.0, 30)
    h = 1e-7
    fd = (bubble(r + h, eps, N) - bubble(r - h, eps, N)) / (2 * h)
    assert np.allclose(bubble_radial_derivative(r, eps, N), fd, rtol=1e-6)


# --------------------------------------------------------------- profile


def test_profile_peak_support_and_domination():
    spec = TalentiSpec(2e-2, 0.25, 6)
    grid = RadialGrid(1.0, 1024, kind="graded")
    u = talenti_profile(spec, grid)
    assert u.values[0] == pytest.approx(
        talenti_constant(6) * spec.eps ** (-1.0), rel=1e-14
    )
    outside = grid.nodes >= 2 * spec.rho
    assert np.all(u.values[outside] == 0.0)
    assert u.values[-1] == 0.0
    assert np.all(u.values >= 0.0)
    assert np.all(u.values <= bubble(grid.nodes, spec.eps, 6) * (1 + 1e-15))


def test_profile_rejects_oversized_cutoff_and_coarse_grid():
    grid = RadialGrid(1.0, 256)
    with pytest.raises(ValueError):
        talenti_profile(TalentiSpec(1e-2, 0.6, 6), grid)
    with pytest.raises(ValueError):
        talenti_profile(TalentiSpec(1e-4, 0.25, 6), grid)


# ------------------------------------------------------------ quadrature


def test_bundle_agrees_with_grid_quadrature():
    spec = TalentiSpec(5e-2, 0.25, 6)
    b = norm_bundle(spec)
    grid = RadialGrid(1.0, 2048, kind="graded")
    u = talenti_profile(spec, grid)
    w = grid.ball_weights(6)
    v = u.values
    lg = np.zeros_like(v)
    nz = v != 0.0
    lg[nz] = 2.0 * v[nz] ** 2 * np.log(np.abs(v[nz]))
    # the grid curvature carries O(h^2) stencil error; plain quadratures
    # of smooth integrands sit near roundoff
    assert abs(h2_norm(u, 6) ** 2 - b.h2) / b.h2 < 2e-4
    assert abs(float(w @ v**2) - b.l2) / b.l2 < 1e-7
    assert abs(float(w @ np.abs(v) ** critical_exponent(6)) - b.crit) / b.crit < 1e-7
    assert abs(float(w @ lg) - b.logmom) / abs(b.logmom) < 1e-7


def test_whole_space_crit_is_scale_free_and_matches_sobolev():
    for N in (5, 9):
        v1 = whole_space_crit(1e-3, N)
        v2 = whole_space_crit(1e-2, N)
        assert abs(v1 - v2) / v1 < 1e-12
        assert abs(v1 - sobolev_pow(N)) / sobolev_pow(N) < 1e-12


def test_whole_space_crit_rejects_fat_core():
    with pytest.raises(ValueError):
        whole_space_crit(20.0, 9, r_max=1e3)
    with pytest.raises(ValueError):
        whole_space_crit(-1.0, 9)


def _j_oracle(N):
    # independent route: sinh substitution plus a two-term algebraic tail
    T = 1e4
    s_max = math.asinh(T)
    val = gauss_panels(
        lambda s: (1.0 + np.sinh(s) ** 2) ** (4.0 - N)
        * np.sinh(s) ** (N - 1)
        * np.cosh(s),
        0.0,
        s_max,
        panels=200,
        order=14,
    )
    tail = T ** (8 - N) / (N - 8) - (N - 4) * T ** (6 - N) / (N - 6)
    return sphere_area(N) * (val + tail)


def test_j_constant_against_quadrature_oracle():
    for N in (9, 10, 12):
        assert abs(j_constant(N) - _j_oracle(N)) / j_constant(N) < 1e-12
    assert j_constant(9) == pytest.approx(12.750820199387, rel=1e-12)


def test_j_constant_rejects_divergent_dimensions():
    for N in (5, 8):
        with pytest.raises(ValueError):
            j_constant(N)
    with pytest.raises(ValueError):
        j_constant(9.0)


def test_phi_moment_scaling_and_bracket():
    for N in (5, 6, 7):
        # the bridge profile is self-similar in r/rho, so the moment
        # scales exactly like the pure power
        assert phi_moment(0.5, N) == pytest.approx(
            2.0 ** (8 - N) * phi_moment(0.25, N), rel=1e-12
        )
        lo = 0.25 ** (8 - N) / (8 - N)
        hi = 0.5 ** (8 - N) / (8 - N)
        assert lo < phi_moment(0.25, N) < hi


def test_phi_moment_rejects_other_dimensions():
    for N in (8, 9):
        with pytest.raises(ValueError):
            phi_moment(0.25, N)
    with pytest.raises(ValueError):
        phi_moment(-0.25, 5)


# ----------------------------------------------------------- predictions


def test_predict_norm_limits():
    p = predict(TalentiSpec(1e-2, 0.25, 7), VerifyCase.NORMS)
    assert p.h2_leading == sobolev_pow(7)
    assert p.crit_leading == sobolev_pow(7)
    assert p.h2_remainder_order == 3.0
    assert p.crit_remainder_order == 7.0


def test_predict_high_dim_coefficients():
    p = predict(TalentiSpec(1e-2, 0.25, 9), VerifyCase.HIGH_DIM)
    c2j = talenti_constant_sq(9) * j_constant(9)
    assert p.l2_coeff == pytest.approx(c2j, rel=1e-15)
    assert p.logmom_coeff == pytest.approx(5.0 * c2j, rel=1e-15)
    with pytest.raises(ValueError):
        predict(TalentiSpec(1e-2, 0.25, 7), VerifyCase.HIGH_DIM)


def test_predict_dim8_leading_and_band():
    spec = TalentiSpec(1e-2, 0.25, 8)
    p = predict(spec, VerifyCase.DIM8)
    assert p.l2_coeff == pytest.approx(1920.0 * math.pi**4 / 3.0, rel=1e-15)
    lo, hi = p.logmom_bracket
    assert lo < hi
    with pytest.raises(ValueError):
        predict(TalentiSpec(1e-2, 0.25, 9), VerifyCase.DIM8)


def test_predict_low_dim_coefficients():
    spec = TalentiSpec(1e-2, 0.25, 6)
    p = predict(spec, VerifyCase.LOW_DIM)
    lead = talenti_constant_sq(6) * sphere_area(6) * phi_moment(0.25, 6)
    assert p.l2_coeff == pytest.approx(lead, rel=1e-15)
    assert p.logmom_coeff == pytest.approx(-2.0 * lead, rel=1e-15)
    assert p.logmom_coeff < 0.0
    with pytest.raises(ValueError):
        predict(TalentiSpec(1e-2, 0.25, 9), VerifyCase.LOW_DIM)


# ------------------------------------------------------------------ fits


def _synthetic_samples(coeffs, powers, eps_values):
    out = []
    for e in eps_values:
        val = sum(c * f(e) for c, f in zip(coeffs, powers))
        out.append((float(e), NormBundle(h2=1.0, l2=val, crit=1.0, logmom=val)))
    return out


def test_fit_recovers_synthetic_coefficients():
    eps_values = np.geomspace(1e-3, 1e-1, 11)
    sam = _synthetic_samples(
        (3.7, -1.2), (lambda e: e**4, lambda e: e**5), eps_values
    )
    rec = fit_coefficients(sam, FitField.L2, 9)
    assert rec.coefficients[0] == pytest.approx(3.7, rel=1e-10)
    assert rec.coefficients[1] == pytest.approx(-1.2, rel=1e-8)
    assert rec.residual < 1e-12
    assert rec.basis[0] == "eps^4"


def test_fit_rejects_few_or_narrow_samples():
    eps_values = np.geomspace(1e-3, 1e-1, 4)
    sam = _synthetic_samples((1.0,), (lambda e: e**4,), eps_values)
    with pytest.raises(ValueError):
        fit_coefficients(sam, FitField.L2, 9)
    eps_values = np.linspace(1e-3, 4e-3, 8)
    sam = _synthetic_samples((1.0,), (lambda e: e**4,), eps_values)
    with pytest.raises(ValueError):
        fit_coefficients(sam, FitField.L2, 9)


def test_loglog_slope_recovers_power_and_validates():
    eps_values = np.geomspace(1e-3, 1e-1, 9)
    assert loglog_slope(eps_values, 2.0 * eps_values**3.5) == pytest.approx(
        3.5, rel=1e-12
    )
    with pytest.raises(ValueError):
        loglog_slope([1e-2], [1.0])
    with pytest.raises(ValueError):
        loglog_slope([1e-2, 1e-1], [0.0, 1.0])


def _bundle_ladder(N, rho, eps_values):
    return [
        (float(e), norm_bundle(TalentiSpec(float(e), rho, N))) for e in eps_values
    ]


def test_fitted_coefficients_match_predictions():
    # the deep window keeps the subleading contamination of the
    # log-moment fit far below the coefficient tolerances
    rho = 0.25
    window = np.geomspace(1e-5, 1e-4, 9)
    bounds = {
        5: (5e-7, 5e-6),
        6: (5e-6, 5e-5),
        7: (1e-6, 8e-3),
        9: (1e-9, 5e-3),
        10: (1e-12, 5e-5),
    }
    for N, (l2_tol, lm_tol) in bounds.items():
        sam = _bundle_ladder(N, rho, window)
        spec = TalentiSpec(1e-2, rho, N)
        if N >= 9:
            p = predict(spec, VerifyCase.HIGH_DIM)
            lm_target = p.logmom_coeff
        else:
            p = predict(spec, VerifyCase.LOW_DIM)
            lm_target = p.logmom_coeff
        fl2 = fit_coefficients(sam, FitField.L2, N)
        flm = fit_coefficients(sam, FitField.LOGMOM, N)
        assert abs(fl2.coefficients[0] - p.l2_coeff) / p.l2_coeff < l2_tol
        assert abs(flm.coefficients[0] - lm_target) / abs(lm_target) < lm_tol


def test_dim8_log_moment_sits_inside_band():
    rho = 0.25
    ladder = np.geomspace(1e-3, 1e-1, 21)
    checked = 0
    for eps in ladder[ladder <= rho / 10.0]:
        spec = TalentiSpec(float(eps), rho, 8)
        b = norm_bundle(spec)
        p = predict(spec, VerifyCase.DIM8)
        lo, hi = p.logmom_bracket
        base = p.l2_coeff * eps**4 * math.log(1.0 / eps)
        assert (b.logmom - lo) / base > 10.0
        assert (hi - b.logmom) / base > 18.0
        checked += 1
    assert checked == 14


# ------------------------------------------------------------- ray check


def test_ray_scalars_mirror_the_bundle():
    spec = TalentiSpec(1e-2, 0.25, 9)
    b = norm_bundle(spec)
    s = ray_scalars(spec)
    assert (s.curvature, s.mass, s.log_moment, s.crit) == (
        b.h2,
        b.l2,
        b.logmom,
        b.crit,
    )
    assert s.p_crit == critical_exponent(9)


def test_sup_matches_closed_form_without_lower_order_terms():
    spec = TalentiSpec(1e-2, 1.0, 9)
    s = ray_scalars(spec)
    sup, t_eps = sup_along_ray(spec, Params(9, 0.0, 0.0, 4.0))
    q = critical_exponent(9)
    closed = (2.0 / 9.0) * (math.sqrt(s.curvature) / s.crit ** (1.0 / q)) ** 4.5
    assert abs(sup - closed) / closed < 1e-12
    assert t_eps > 0.0


def test_sup_dips_below_threshold_high_dimension():
    spec = TalentiSpec(1e-2, 1.0, 9)
    sup, t_eps = sup_along_ray(spec, Params(9, 0.0, 1.0, 4.0))
    c_s = threshold_cs(sobolev_pow(9), 9)
    margin = (sup - c_s) / c_s
    assert -2.6e-8 < margin < -2.3e-8
    assert 0.99 < t_eps < 1.01


def test_sup_dips_below_threshold_low_dimension_negative_mu():
    # the (lam, mu) pair keeps the mountain-pass level positive even
    # with the logarithmic term pulling down
    lam, mu, R = 0.0, -300.0, 1.0
    assert 2.0 / 6.0 * sobolev_pow(6) + 0.5 * mu * ball_volume(6, R) > 0.0
    spec = TalentiSpec(1e-2, 0.5, 6)
    sup, t_eps = sup_along_ray(spec, Params(6, lam, mu, R))
    c_s = threshold_cs(sobolev_pow(6), 6)
    margin = (sup - c_s) / c_s
    assert -2.5e-3 < margin < -1.9e-3
    assert 0.99 < t_eps < 1.01


def test_sup_rejects_mismatched_geometry():
    spec = TalentiSpec(1e-2, 1.0, 9)
    with pytest.raises(ValueError):
        sup_along_ray(spec, Params(8, 0.0, 1.0, 4.0))
    with pytest.raises(ValueError):
        sup_along_ray(spec, Params(9, 0.0, 1.0, 1.5))
