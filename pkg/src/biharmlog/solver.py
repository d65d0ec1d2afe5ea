"""Discrete solution candidates for the clamped fourth-order problem.

Two search strategies produce nontrivial critical-point candidates of
the energy on a radial grid.  For a positive logarithmic coefficient
the natural route is constrained descent: every iterate is pulled back
onto the stationary-ray manifold, where the energy is bounded below
and the infimum is the ground-state level.  For either sign a
path-based search deforms a string of profiles joining zero to a
negative-energy endpoint and descends at the highest point of the
string, approximating the min-max level.

Both methods move in the metric induced by the curvature form: a
descent direction is obtained by applying the inverse clamped
bilaplacian to the weak-form residual (the Riesz representative that
``residual`` already returns).  Plain coordinate gradients stall on
this problem because the stiffness spectrum spreads over many orders
of magnitude.

Positivity is enforced by replacing an iterate with its absolute
value, which leaves the energy unchanged, so the reported candidates
are nonnegative nodewise.  A converged candidate solves the discrete
problem on its own grid only; ``certify`` re-evaluates it on a grid
with twice the resolution and reports the drift, flagging candidates
whose energy moves by more than a part in a thousand.
"""

import math
import os
from dataclasses import dataclass
from typing import Optional

_TRACE = os.environ.get("BIHARM_MP_TRACE") == "1"  # temporary debug hook

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.sparse.linalg import LinearOperator, gmres

from .constants import Constants, Params
from .discretization import RadialFunction, RadialGrid, biharmonic_solve
from .errors import ConvergenceError, NumericsError
from .functional import (
    FiberScalars,
    ManifoldBranch,
    _bilap_pairing,
    energy,
    nehari_root,
    psi_value,
    nehari_project,
    residual,
    weak_pairing,
)
from .profiles import positive_bump, rng_for

__all__ = [
    "Solution",
    "CertifyReport",
    "nehari_descent",
    "mountain_pass",
    "certify",
    "MAX_ITER",
]

MAX_ITER = 10_000
PATH_POINTS = 32
INNER_STEPS = 4

# segment interiors are sampled at these fractions when locating the
# path maximum; sampling only the knots lets the polygon slip between
# them and under-report its highest level
SEGMENT_SAMPLES = (0.25, 0.5, 0.75)
SHARPEN_STEPS = 30

# re-spacing concentrates knots where the path runs high: density is
# 1 + BETA * ((level - min) / (max - min))**GAMMA per unit arc, so the
# crest is resolved without starving the rest of the string
DENSITY_BETA = 8.0
DENSITY_GAMMA = 4.0

# string relaxation alone resolves the crest only down to the chord
# interpolation error; after NEWTON_WAIT outer passes without a 3%
# residual improvement (or two dead line searches in a row) the
# located maximum is polished by damped inexact-Newton steps, each
# Jacobian action taken by finite differences and solved by GMRES
NEWTON_WAIT = 10
NEWTON_STEPS = 30
NEWTON_KRYLOV = 256
NEWTON_COOLDOWN = 8
STALL_LIMIT = 50

# Armijo backtracking: halve the step until the decrease beats
# ARMIJO_SIGMA * alpha * |g|^2, give up below MIN_STEP
ARMIJO_SIGMA = 1e-4
ARMIJO_SHRINK = 0.5
MIN_STEP = 2.0 ** -48

# once the Armijo target sinks below the floating-point noise of the
# energy itself, sufficient decrease is unmeasurable; steps are then
# accepted on residual decrease with the energy allowed to wander
# inside the noise band.  Quadrature sums accumulate roundoff like
# sqrt(n) times the magnitude of the summed terms.
NOISE_SAFETY = 8.0


def _noise_band(n, scale) -> float:
    return NOISE_SAFETY * math.sqrt(n) * np.finfo(float).eps * (1.0 + scale)

# a candidate whose curvature norm sits below this is treated as the
# zero function and refused by certify
TRIVIAL_FLOOR = 1e-12


@dataclass(frozen=True)
class Solution:
    """A converged critical-point candidate on a fixed radial grid.

    ``nehari_gap`` is the weak pairing of the candidate with itself,
    zero at an exact critical point.  ``converged`` is always True for
    objects returned by the solvers; failed runs raise instead.
    """

    u: RadialFunction
    energy: float
    residual_norm: float
    nehari_gap: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class CertifyReport:
    """Refinement audit of a converged candidate.

    ``energy_drift`` is relative to the coarse-grid energy; drift
    above one part in a thousand sets ``grid_polluted``.  ``branch``
    is the manifold branch of the candidate's stationary ray, or None
    when the ray has no usable stationary point.
    """

    energy_refined: float
    energy_drift: float
    residual_refined: float
    branch: Optional[ManifoldBranch]
    negative_nodes: int
    threshold_slack: float
    grid_polluted: bool


def _seed_profile(grid: RadialGrid, seed) -> RadialFunction:
    # smooth positive start, deterministic per seed; shape parameters
    # drawn from a counter-based stream so reruns are bit-identical
    rng = rng_for(seed, 0x5EED)
    sharpness = 2.0 + 4.0 * rng.random()
    amplitude = 0.5 + 1.5 * rng.random()
    return positive_bump(grid, sharpness=sharpness, amplitude=amplitude)


def _psi_scale(s: FiberScalars, p: Params, t) -> float:
    # magnitude of the energy's constituent terms at t; the level is a
    # small difference of these, so line-search comparisons cannot
    # resolve changes below NOISE_BAND times this scale
    t2 = t * t
    return (
        0.5 * t2 * (s.curvature + abs(p.lam) * s.mass + abs(p.mu) * s.mass)
        + 0.5 * abs(p.mu) * s.mass * t2 * abs(math.log(t2))
        + 0.5 * abs(p.mu) * t2 * abs(s.log_moment)
        + t**s.p_crit * s.crit / s.p_crit
    )


def _project_ray(w: RadialFunction, p: Params):
    """Scale a profile to its stationary ray point; return the scaled
    profile, its energy, the scale factor, and the term magnitude."""
    scal = FiberScalars.from_function(w, p)
    t = nehari_root(scal, p)
    v = RadialFunction(w.grid, t * w.values)
    return v, psi_value(scal, p, t), t, _psi_scale(scal, p, t)


def nehari_descent(p: Params, seed=0, tol=1e-8, n=2048, kind="uniform") -> Solution:
    """Constrained descent for a positive logarithmic coefficient.

    Each iteration takes a negative-gradient step in the curvature
    metric, restores positivity with an absolute value, and rescales
    onto the stationary-ray manifold.  Stops when the residual norm
    drops below ``tol``; raises ConvergenceError at the iteration cap
    or when the line search cannot make progress.
    """
    if not (p.mu > 0.0):
        raise ValueError("constrained descent requires a positive log coefficient")
    if not (tol > 0.0):
        raise ValueError("tolerance must be positive")
    grid = RadialGrid(p.R, n, kind=kind)
    v, level, _, scale = _project_ray(_seed_profile(grid, seed), p)
    for it in range(1, MAX_ITER + 1):
        g, res_norm = residual(v, p)
        if res_norm < tol:
            gap = weak_pairing(v, v, p)
            return Solution(v, level, res_norm, gap, it - 1, True)
        # |g|^2 in the descent metric is the residual norm squared,
        # because g is the Riesz representative of the weak form
        g_sq = res_norm * res_norm
        noise = _noise_band(grid.n, scale)
        alpha = 1.0
        while True:
            w = RadialFunction(grid, np.abs(v.values - alpha * g.values))
            v_try, level_try, _, scale_try = _project_ray(w, p)
            target = ARMIJO_SIGMA * alpha * g_sq
            if target > noise:
                if level_try <= level - target:
                    break
            elif level_try <= level - noise:
                # the formal target is below evaluation noise but the
                # measured decrease is not: unambiguous progress
                break
            elif level_try <= level + noise:
                # decrease is unmeasurable; accept on progress in the
                # stopping metric instead
                _, res_try = residual(v_try, p)
                if res_try < res_norm:
                    break
            alpha *= ARMIJO_SHRINK
            if alpha < MIN_STEP:
                raise ConvergenceError(
                    f"line search stalled at residual {res_norm:.3e} "
                    f"after {it} iterations (tol {tol:.1e})"
                )
        assert level_try <= level + noise  # descent up to evaluation noise
        v, level, scale = v_try, level_try, scale_try
    raise ConvergenceError(
        f"no convergence in {MAX_ITER} iterations; last residual {res_norm:.3e}"
    )


def _negative_endpoint(bump: RadialFunction, p: Params):
    # scale the bump along its ray until the energy goes negative, then
    # pull the endpoint back near the zero crossing so the path stays
    # short and the knots concentrate around the barrier
    scal = FiberScalars.from_function(bump, p)
    s, lo = 1.0, 1.0
    for _ in range(200):
        if psi_value(scal, p, s) < 0.0:
            if s > lo:
                cross = brentq(
                    lambda x: psi_value(scal, p, x), lo, s, xtol=1e-12, rtol=1e-12
                )
                s = 1.05 * cross
            if psi_value(scal, p, s) >= 0.0:
                raise NumericsError("endpoint refinement lost the sign change")
            return s
        lo = s
        s *= 2.0
    raise NumericsError("could not drive the endpoint energy negative")


def _arc_segments(path, grid, N):
    # consecutive distances in the curvature metric
    free = path[:, : grid.n - 1]  # pairing acts on the free values
    seg = np.empty(path.shape[0] - 1)
    for i in range(path.shape[0] - 1):
        d = free[i + 1] - free[i]
        seg[i] = math.sqrt(max(_bilap_pairing(grid, N, d, d), 0.0))
    return seg


def _drop_redundant_knot(path, grid, N, protect):
    """Remove the interior knot whose removal bends the polygon least.

    Knots listed in ``protect`` and the endpoints are kept, so a
    freshly descended point and its neighbours survive; the straight
    stretches of the string give their knots up first.
    """
    m = path.shape[0]
    seg = _arc_segments(path, grid, N)
    free = path[:, : grid.n - 1]
    best_j, best_defect = 1, math.inf
    for j in range(1, m - 1):
        if j in protect:
            continue
        d = free[j + 1] - free[j - 1]
        chord = math.sqrt(max(_bilap_pairing(grid, N, d, d), 0.0))
        defect = seg[j - 1] + seg[j] - chord
        if defect < best_defect:
            best_defect, best_j = defect, j
    return np.delete(path, best_j, axis=0)


def _redistribute(path, grid, N, count, levels=None):
    """Re-sample the path into ``count`` knots equidistributed in a
    weighted arc length under the curvature metric.  Endpoints stay
    fixed; interior profiles are linear interpolants of the old ones,
    which preserves nonnegativity.  When knot ``levels`` are supplied,
    the density rises towards the highest stretch of the path so the
    crest stays resolved."""
    k = path.shape[0]
    seg = _arc_segments(path, grid, N)
    arc = np.concatenate(([0.0], np.cumsum(seg)))
    total = arc[-1]
    if not (total > 0.0):
        raise NumericsError("path degenerated to a single profile")
    if levels is None:
        weight = np.ones(k)
    else:
        lo, hi = float(np.min(levels)), float(np.max(levels))
        rel = (np.asarray(levels) - lo) / (hi - lo) if hi > lo else np.zeros(k)
        weight = 1.0 + DENSITY_BETA * rel**DENSITY_GAMMA
    wseg = 0.5 * (weight[:-1] + weight[1:]) * seg
    cumw = np.concatenate(([0.0], np.cumsum(wseg)))
    targets = np.interp(np.linspace(0.0, cumw[-1], count), cumw, arc)
    out = np.empty((count, path.shape[1]))
    out[0] = path[0]
    out[-1] = path[-1]
    for j in range(1, count - 1):
        i = int(np.searchsorted(arc, targets[j], side="right") - 1)
        i = min(max(i, 0), k - 2)
        width = arc[i + 1] - arc[i]
        theta = 0.0 if width == 0.0 else (targets[j] - arc[i]) / width
        out[j] = (1.0 - theta) * path[i] + theta * path[i + 1]
    return out


def _safe_level(grid, values, p):
    # a trial step can jump to a profile too large for the energy to
    # evaluate; treat that as an infinitely bad step, not an error
    try:
        return energy(RadialFunction(grid, values), p)
    except NumericsError:
        return math.inf


def _transverse(grid, N, g_vals, tau):
    """Component of a gradient orthogonal, in the curvature metric, to
    the local path direction, and its norm.  Stepping against it lowers
    the energy without sliding the point along the string, which would
    just carry the maximum downhill and flatten the barrier."""
    m = grid.n - 1
    tt = _bilap_pairing(grid, N, tau[:m], tau[:m])
    if tt > 0.0:
        gt = _bilap_pairing(grid, N, g_vals[:m], tau[:m])
        d = g_vals - (gt / tt) * tau
    else:
        d = g_vals
    dn = math.sqrt(max(_bilap_pairing(grid, N, d[:m], d[:m]), 0.0))
    return d, dn


def _relax_knot(path, j, levels, grid, p, cap):
    """One capped transverse descent step at knot ``j`` (sufficient
    decrease only, skipped when no measurable step exists).  Settles
    the string onto the minimum-energy path; ``cap`` bounds the motion
    in the curvature metric so the knot cannot overtake its neighbours
    and tangle the string."""
    u = RadialFunction(grid, path[j])
    g, _ = residual(u, p)
    d, dn = _transverse(grid, p.N, g.values, path[j + 1] - path[j - 1])
    if not (dn > 0.0):
        return
    level = float(levels[j])
    noise = _noise_band(grid.n, _psi_scale(FiberScalars.from_function(u, p), p, 1.0))
    alpha = min(1.0, cap / dn)
    while alpha >= MIN_STEP:
        trial = np.abs(path[j] - alpha * d)
        level_try = _safe_level(grid, trial, p)
        target = ARMIJO_SIGMA * alpha * dn * dn
        if level_try <= level - max(target, noise):
            path[j] = trial
            levels[j] = level_try
            return
        alpha *= ARMIJO_SHRINK


def _poly_point(path, s):
    # point on the polygonal path at global coordinate s in [0, m-1]
    i = min(int(math.floor(s)), path.shape[0] - 2)
    theta = s - i
    return (1.0 - theta) * path[i] + theta * path[i + 1]


def _locate_max(path, grid, p, levels):
    """Find the energy maximum along the polygonal path.

    Knot levels are taken as given; segment interiors are sampled at
    fixed fractions so the maximum cannot hide between knots, and the
    winning bracket is sharpened by golden section.  Returns the
    global coordinate of the maximum, its level, and the highest
    sampled level at least one segment away (the hand-off level for
    the descent phase).
    """
    m = path.shape[0]
    coords = [float(j) for j in range(m)]
    samples = [float(lv) for lv in levels]
    for i in range(m - 1):
        for th in SEGMENT_SAMPLES:
            vals = (1.0 - th) * path[i] + th * path[i + 1]
            coords.append(i + th)
            samples.append(energy(RadialFunction(grid, vals), p))
    best = int(np.argmax(samples))
    best_s, best_lev = coords[best], samples[best]
    runner_up = max(
        (lv for s, lv in zip(coords, samples) if abs(s - best_s) >= 1.0),
        default=-math.inf,
    )
    ratio = 0.5 * (math.sqrt(5.0) - 1.0)
    a = max(best_s - 0.25, 0.0)
    b = min(best_s + 0.25, float(m - 1))
    c = b - ratio * (b - a)
    d = a + ratio * (b - a)
    f_c = energy(RadialFunction(grid, _poly_point(path, c)), p)
    f_d = energy(RadialFunction(grid, _poly_point(path, d)), p)
    for _ in range(SHARPEN_STEPS):
        if f_c >= f_d:
            b, d, f_d = d, c, f_c
            c = b - ratio * (b - a)
            f_c = energy(RadialFunction(grid, _poly_point(path, c)), p)
        else:
            a, c, f_c = c, d, f_d
            d = a + ratio * (b - a)
            f_d = energy(RadialFunction(grid, _poly_point(path, d)), p)
    s_star, lev_star = (c, f_c) if f_c >= f_d else (d, f_d)
    if lev_star < best_lev:
        s_star, lev_star = best_s, best_lev
    return s_star, lev_star, runner_up


def _newton_polish(x, grid, p, tol, move_cap):
    """Damped Newton refinement of a near-critical profile.

    Each direction solves the linearized stationarity equation with
    GMRES.  The Jacobian of the Riesz gradient acts exactly, one
    banded solve per application: the gradient is the profile minus
    the preconditioned force, so its derivative is the identity minus
    the preconditioned pointwise force derivative.  (A finite
    difference of the gradient is useless here: the force derivative
    carries ln u^2, which swings without bound where the profile is
    tiny, so difference quotients cross those scales and produce
    ascent directions.)  Steps must shrink the residual and keep the
    level inside the entry basin; a level collapsing towards zero or
    blowing up means the iteration left the barrier region, not that
    it found the saddle.  Returns the refined profile, its residual
    norm, and whether the tolerance was met.
    """
    m = grid.n - 1
    u = RadialFunction(grid, x)
    g, res = residual(u, p)
    level0 = _safe_level(grid, x, p)
    if not (level0 > 0.0) or not math.isfinite(level0):
        return x, res, False
    for _ in range(NEWTON_STEPS):
        if res < tol:
            return x, res, True
        mult = (
            p.lam
            + p.mu * (np.log(np.maximum(x * x, 1e-300)) + 2.0)
            + (p.p_crit - 1.0) * np.abs(x) ** (p.p_crit - 2.0)
        )

        def matvec(v):
            vv = np.zeros(grid.n)
            vv[:m] = v
            load = RadialFunction(grid, mult * vv)
            return v - biharmonic_solve(load, p.N).values[:m]

        # the descent test below runs in the curvature norm, which
        # amplifies high frequencies far beyond the euclidean norm
        # GMRES minimizes, so the linear system must be solved nearly
        # exactly for the direction to be trustworthy in that norm
        op = LinearOperator((m, m), matvec=matvec, dtype=float)
        d, info = gmres(
            op, g.values[:m], rtol=1e-12, atol=0.0,
            restart=min(m, NEWTON_KRYLOV), maxiter=6,
        )
        if not np.all(np.isfinite(d)):
            return x, res, False
        step = np.zeros(grid.n)
        step[:m] = d
        dn = math.sqrt(max(_bilap_pairing(grid, p.N, d, d), 0.0))
        if not (dn > 0.0):
            return x, res, False
        frac = min(1.0, 8.0 * move_cap / dn)
        accepted = False
        for _ in range(6):
            x_try = x - frac * step
            lev_try = _safe_level(grid, x_try, p)
            if 0.25 * level0 < lev_try < 4.0 * level0:
                g_try, res_try = residual(RadialFunction(grid, x_try), p)
                if _TRACE:
                    print(
                        f"  [nw] res={res:.4e} dn={dn:.3e} info={info} "
                        f"frac={frac:.2e} res_try={res_try:.4e} "
                        f"lev_try={lev_try:.6f}",
                        flush=True,
                    )
                if res_try < (1.0 - 0.2 * frac) * res:
                    x, g, res = x_try, g_try, res_try
                    accepted = True
                    break
            elif _TRACE:
                print(
                    f"  [nw] res={res:.4e} dn={dn:.3e} info={info} "
                    f"frac={frac:.2e} lev_try={lev_try:.6f} BAND",
                    flush=True,
                )
            frac *= 0.5
        if not accepted:
            return x, res, False
    return x, res, res < tol


def mountain_pass(p: Params, seed=0, tol=1e-8, n=2048, kind="uniform") -> Solution:
    """Elastic-string search for the min-max level.

    A path of profiles from zero to a negative-energy endpoint is
    relaxed by locating its energy maximum (scanning segment interiors
    as well as knots), taking a capped descent step there transverse
    to the string, splicing the stepped point back in, settling every
    interior knot the same way, and re-spacing with knot density
    concentrated near the crest.  Because every admissible path tops
    the min-max level, the located maximum can never slip below it.
    Once re-spacing stops paying (the crest is resolved down to chord
    interpolation error) the maximum is polished by damped
    inexact-Newton steps.  Stops when the residual at the path maximum
    drops below ``tol``.  Raises NumericsError if the maximum migrates
    to an endpoint (no interior barrier on this grid), and
    ConvergenceError at the iteration cap or on a dead line search.
    """
    if not (tol > 0.0):
        raise ValueError("tolerance must be positive")
    grid = RadialGrid(p.R, n, kind=kind)
    bump = _seed_profile(grid, seed)
    s_end = _negative_endpoint(bump, p)
    ts = np.linspace(0.0, s_end, PATH_POINTS)
    path = ts[:, None] * bump.values[None, :]
    levels = np.array([energy(RadialFunction(grid, row), p) for row in path])
    best_res = math.inf
    since_improve = 0
    stall_run = 0
    newton_cool = 0
    captured = 0
    for it in range(1, MAX_ITER + 1):
        s_star, level_k, runner_up = _locate_max(path, grid, p, levels)
        # only an exact endpoint hit is a collapse; a barrier sitting
        # deep inside the first segment is legitimate when the endpoint
        # scale dwarfs the barrier scale
        if s_star <= 1e-7 or s_star >= PATH_POINTS - 1 - 1e-7:
            raise NumericsError("path maximum collapsed onto an endpoint")
        if not (level_k > 0.0):
            # a path between the origin and a negative-energy endpoint
            # always tops the min-max level, so a non-positive maximum
            # means the barrier slipped between samples
            raise NumericsError("string maximum fell to the trivial level")
        x = _poly_point(path, s_star)
        u_k = RadialFunction(grid, x)
        g, res_norm = residual(u_k, p)
        if _TRACE and (it <= 10 or it % 25 == 0):
            print(
                f"[mp] it={it} s*={s_star:.4f} lev={level_k:.6f} "
                f"runner={runner_up:.6f} res={res_norm:.4e} "
                f"stall={stall_run} wait={since_improve}",
                flush=True,
            )
        if res_norm < tol:
            u_k = RadialFunction(grid, np.abs(x))
            gap = weak_pairing(u_k, u_k, p)
            return Solution(u_k, level_k, res_norm, gap, it - 1, True)
        if res_norm < 0.97 * best_res:
            best_res = res_norm
            since_improve = 0
        else:
            since_improve += 1
        seg = _arc_segments(path, grid, p.N)
        move_cap = float(np.mean(seg))
        if newton_cool == 0 and (stall_run >= 2 or since_improve >= NEWTON_WAIT):
            x_new, res_new, ok = _newton_polish(x, grid, p, tol, move_cap)
            level_new = _safe_level(grid, x_new, p)
            # a polished point that no longer tops the rest of the
            # string has slid off the barrier into some lower basin,
            # and one with a material sign change is not the
            # nonnegative candidate this search is for; discard either
            # rather than splice it into the crest
            clean = float(np.min(x_new)) >= -1e-9 * float(np.max(np.abs(x_new)))
            if res_new < res_norm and level_new > max(runner_up, 0.0) and clean:
                x, level_k, taken = x_new, level_new, 1
                if ok and res_new < tol:
                    u_fin = RadialFunction(grid, np.abs(x))
                    gap = weak_pairing(u_fin, u_fin, p)
                    return Solution(u_fin, level_k, res_new, gap, it, True)
            else:
                taken = 0
                if ok:
                    # the polish converged, but to a point this search
                    # cannot accept; once that repeats the crest has no
                    # admissible critical point to offer
                    captured += 1
                    if captured >= 3:
                        raise ConvergenceError(
                            "descent at the path maximum is repeatedly "
                            "captured by an inadmissible critical point "
                            f"(sign-changing or sub-path, level "
                            f"{level_new:.6g}); no nonnegative min-max "
                            "candidate is reachable on this grid"
                        )
            newton_cool = 0 if ok else NEWTON_COOLDOWN
            if ok:
                since_improve = 0
        else:
            newton_cool = max(0, newton_cool - 1)
            # descend transverse to the string inside a trust region of
            # one mean knot spacing per outer pass; larger motion
            # outruns the string's resolution and tangles it, and the
            # tangential component would only slide the maximum
            # downhill along the path.  Bites also stop at the
            # runner-up level so they notch the crest instead of
            # tunnelling through it
            i_lo = min(int(math.floor(s_star)), PATH_POINTS - 2)
            tau = path[i_lo + 1] - path[i_lo]
            cum_move = 0.0
            taken = 0
            for _ in range(INNER_STEPS):
                d, dn = _transverse(grid, p.N, g.values, tau)
                if not (dn > 0.0):
                    break
                noise = _noise_band(
                    grid.n, _psi_scale(FiberScalars.from_function(u_k, p), p, 1.0)
                )
                alpha = min(1.0, (move_cap - cum_move) / dn)
                stalled = False
                measured = False
                while True:
                    if alpha < MIN_STEP:
                        stalled = True
                        break
                    trial = np.abs(x - alpha * d)
                    level_try = _safe_level(grid, trial, p)
                    target = ARMIJO_SIGMA * alpha * dn * dn
                    if target > noise:
                        if level_try <= level_k - target:
                            measured = True
                            break
                    elif level_try <= level_k - noise:
                        # measured decrease clears the noise band even
                        # though the formal target does not
                        measured = True
                        break
                    elif level_try <= level_k + noise:
                        _, res_try = residual(RadialFunction(grid, trial), p)
                        if res_try < res_norm:
                            break
                    alpha *= ARMIJO_SHRINK
                if stalled:
                    break
                if measured:
                    # the accepted step may be short of the best point
                    # on this direction; expand within the trust
                    # region, but never below the runner-up
                    while (
                        2.0 * alpha * dn <= move_cap - cum_move
                        and level_try > runner_up
                    ):
                        wide = np.abs(x - 2.0 * alpha * d)
                        level_wide = _safe_level(grid, wide, p)
                        if level_wide < level_try:
                            trial, level_try, alpha = wide, level_wide, 2.0 * alpha
                        else:
                            break
                assert level_try <= level_k + noise  # descent up to noise
                x = trial
                level_k = level_try
                taken += 1
                cum_move += alpha * dn
                if level_k <= runner_up or cum_move >= move_cap:
                    break
                u_k = RadialFunction(grid, x)
                g, res_norm = residual(u_k, p)
                if res_norm < tol:
                    break
        if taken == 0:
            # the maximum cannot move within the noise band; knot
            # settling and re-spacing may still unblock it, but give up
            # once that stops paying off
            stall_run += 1
            if stall_run > STALL_LIMIT:
                raise ConvergenceError(
                    f"line search stalled at the path maximum, residual "
                    f"{res_norm:.3e} after {it} iterations (tol {tol:.1e})"
                )
        else:
            stall_run = 0
        i = min(int(math.floor(s_star)), PATH_POINTS - 2)
        theta = s_star - i
        if theta < 1e-9 or theta > 1.0 - 1e-9:
            # the maximum sat at a knot: replace it in place
            i = i if theta < 1e-9 else i + 1
            path[i] = x
            levels[i] = level_k
        else:
            spliced = np.vstack([path[: i + 1], x[None, :], path[i + 1 :]])
            # drop the most redundant knot so the notch just dug is
            # kept instead of being interpolated away
            path = _drop_redundant_knot(
                spliced, grid, p.N, protect={i, i + 1, i + 2}
            )
            levels = np.array([energy(RadialFunction(grid, row), p) for row in path])
        # settle every interior knot onto the minimum-energy path,
        # then re-space with the density biased towards the crest
        seg = _arc_segments(path, grid, p.N)
        for j in range(1, PATH_POINTS - 1):
            cap = 0.5 * min(seg[j - 1], seg[j])
            _relax_knot(path, j, levels, grid, p, cap)
        path = _redistribute(path, grid, p.N, PATH_POINTS, levels=levels)
        levels = np.array([energy(RadialFunction(grid, row), p) for row in path])
    raise ConvergenceError(
        f"no convergence in {MAX_ITER} iterations; last residual {res_norm:.3e}"
    )


def certify(sol: Solution, p: Params, c: Constants) -> CertifyReport:
    """Audit a converged candidate on a grid with twice the nodes.

    The candidate is interpolated by a cubic spline onto the refined
    grid (re-clamped at the boundary) and its energy and residual are
    recomputed there.  Also reports the manifold branch of the
    candidate's stationary ray, nodewise negativity, and the gap to
    the compactness threshold.
    """
    if not sol.converged:
        raise ValueError("only converged candidates can be certified")
    grid = sol.u.grid
    nat = math.sqrt(
        max(_bilap_pairing(grid, p.N, sol.u.values[: grid.n - 1],
                           sol.u.values[: grid.n - 1]), 0.0)
    )
    if not (nat > TRIVIAL_FLOOR):
        raise ValueError("candidate is numerically the zero function")
    # graded refinement reuses the constructor's default grading
    fine = RadialGrid(p.R, 2 * grid.n, kind=grid.kind)
    spline = CubicSpline(grid.nodes, sol.u.values)
    vals = spline(fine.nodes)
    vals[-1] = 0.0
    u_fine = RadialFunction(fine, vals)
    e_fine = energy(u_fine, p)
    _, r_fine = residual(u_fine, p)
    drift = abs(e_fine - sol.energy) / max(abs(sol.energy), TRIVIAL_FLOOR)
    try:
        branch = nehari_project(sol.u, p).branch
    except NumericsError:
        branch = None
    from .regions import threshold_report

    slack = threshold_report(p, c, sol)
    return CertifyReport(
        energy_refined=e_fine,
        energy_drift=drift,
        residual_refined=r_fine,
        branch=branch,
        negative_nodes=int(np.count_nonzero(sol.u.values < 0.0)),
        threshold_slack=slack,
        grid_polluted=drift > 1e-3,
    )
