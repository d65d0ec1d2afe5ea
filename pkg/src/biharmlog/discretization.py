"""Radial finite differences on balls: grids, Laplacians, quadrature,
clamped biharmonic solves, and the two principal eigenvalues.

Functions of |x| on B_R are represented by nodal values on a radial
grid.  The radial Laplacian u'' + (N-1)u'/r is discretized with
second-order stencils; at r = 0 the regular limit N u''(0) is taken
through an even-extension ghost node, and at r = R a one-sided
four-point stencil is used so no boundary condition is assumed by the
generic operator.

Two quadrature objects coexist on purpose.  quad_ball uses cubic
interpolatory weights whose moments carry the r^(N-1) Jacobian, so it
integrates polynomials through degree three over the ball exactly on
any grid; those weights are a high-order rule, not a positive measure
(the weight at r = 0 can be a tiny negative number).  Positive
finite-volume cell masses back the stiffness and mass matrices, where
positivity is what makes the eigenvalue pencils well posed.

The clamped bilaplacian is assembled in weak form, K = L^T diag(m) L
with L the boundary-aware Laplacian and m the cell masses.  K is
symmetric positive definite; inverse power iteration on the pencil
(K, M) gives the first plate eigenvalue, and a flux-form pencil gives
the first Dirichlet Laplacian eigenvalue.  Closed-form cross checks
from Bessel crossings live in plate_eigenvalue_bessel and
laplace_eigenvalue_bessel.

A grid instance memoizes per-dimension operators and factorizations;
instances share no state, so distinct grids may be used concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import splu
from scipy.special import ive, jv

from .constants import Constants, Params, _check_dimension, sphere_area
from .errors import ConvergenceError, NumericsError

__all__ = [
    "RadialGrid",
    "RadialFunction",
    "laplacian_radial",
    "radial_derivative",
    "boundary_derivative",
    "quad_ball",
    "h2_norm",
    "biharmonic_solve",
    "bilaplacian_clamped",
    "first_eigen_clamped",
    "first_eigen_clamped_pair",
    "first_eigen_laplace",
    "first_eigen_laplace_pair",
    "plate_eigenvalue_bessel",
    "laplace_eigenvalue_bessel",
    "compute_constants",
]


class RadialGrid:
    """Strictly increasing radial nodes on [0, R] with nodes[0] = 0 and
    nodes[-1] = R.

    kind="uniform" spaces nodes evenly; kind="graded" clusters them
    near the origin through r = R sinh(beta s)/sinh(beta), s in [0, 1],
    which is what concentrated profiles want.  Requires n >= 16.
    """

    def __init__(self, R, n, kind="uniform", beta=6.0):
        if not (R > 0.0) or not math.isfinite(R):
            raise ValueError("radius must be positive and finite")
        n = int(n)
        if n < 16:
            raise ValueError(f"need at least 16 nodes, got {n}")
        s = np.linspace(0.0, 1.0, n)
        if kind == "uniform":
            nodes = R * s
        elif kind == "graded":
            if not (beta > 0.0):
                raise ValueError("grading strength must be positive")
            nodes = R * np.sinh(beta * s) / math.sinh(beta)
        else:
            raise ValueError(f"unknown grid kind {kind!r}")
        nodes[0] = 0.0
        nodes[-1] = R
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("grid nodes failed to be strictly increasing")
        self.R = float(R)
        self.n = n
        self.kind = kind
        self.nodes = nodes
        self._cache = {}

    def __repr__(self):
        return f"RadialGrid(R={self.R}, n={self.n}, kind={self.kind!r})"

    def _memo(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    # -- quadrature ----------------------------------------------------

    def ball_weights(self, N):
        """Nodal weights w with sum(w f(nodes)) = integral of f over
        B_R, exact whenever f is a polynomial of degree <= 3."""
        _check_dimension(N)
        return self._memo(("ball_w", N), lambda: _ball_weights(self, N))

    def cell_masses(self, N):
        """Exact measures of the finite-volume cells around each node;
        strictly positive and summing to |B_R|."""
        _check_dimension(N)
        return self._memo(("cells", N), lambda: _cell_masses(self, N))

    # -- operators -----------------------------------------------------

    def laplacian_matrix(self, N):
        """Generic radial Laplacian, n x n, no boundary condition."""
        _check_dimension(N)
        return self._memo(("lap", N), lambda: _laplacian_general(self, N))

    def laplacian_clamped_matrix(self, N):
        """Laplacian of a clamped function in terms of its n-1 free
        values (u(R) = 0 eliminated, u'(R) = 0 via a mirror ghost)."""
        _check_dimension(N)
        return self._memo(("lap_cl", N), lambda: _laplacian_clamped(self, N))

    def stiffness(self, N):
        """Weak-form clamped bilaplacian K = L^T diag(m) L, symmetric
        positive definite on the free values."""
        _check_dimension(N)

        def build():
            L = self.laplacian_clamped_matrix(N)
            m = self.cell_masses(N)
            K = (L.T @ sp.diags_array(m) @ L).tocsc()
            return ((K + K.T) * 0.5).tocsc()

        return self._memo(("stiff", N), build)

    def _plate_solve(self, N):
        """Linear solver for the stiffness matrix.  The r^(N-1) measure
        makes diag(K) span many orders of magnitude, which ruins a raw
        factorization at the origin rows; factoring the Jacobi-scaled
        matrix D K D instead keeps the solve accurate."""

        def build():
            K = self.stiffness(N)
            d = 1.0 / np.sqrt(K.diagonal())
            if not np.all(np.isfinite(d)):
                raise NumericsError(
                    f"degenerate stiffness diagonal on {self!r}"
                )
            scaled = (sp.diags_array(d) @ K @ sp.diags_array(d)).tocsc()
            try:
                lu = splu(scaled)
            except RuntimeError as exc:
                raise NumericsError(
                    f"singular discrete biharmonic operator on {self!r}"
                ) from exc
            return lambda rhs: d * lu.solve(d * rhs)

        return self._memo(("stiff_solve", N), build)


@dataclass
class RadialFunction:
    """Nodal values of a radial function on a RadialGrid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise ValueError(
                f"expected {self.grid.n} nodal values, got shape {vals.shape}"
            )
        self.values = vals

    @classmethod
    def from_callable(cls, grid, fn):
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))

    def clamp_defect(self):
        """(|u(R)|, |u'(R)|) as measured on the grid; both should be at
        the discretization level for a clamped representative."""
        return abs(float(self.values[-1])), abs(boundary_derivative(self))


def _deriv_weights(nodes, x0, order):
    # interpolatory derivative weights from a small Vandermonde system,
    # scaled for conditioning
    d = np.asarray(nodes, dtype=float) - x0
    scale = np.max(np.abs(d))
    m = len(nodes)
    V = np.vander(d / scale, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = math.factorial(order) / scale**order
    return np.linalg.solve(V, rhs)


def _interior_stencils(r):
    # three-point first and second derivative weights at nodes 1..n-2
    hl = r[1:-1] - r[:-2]
    hr = r[2:] - r[1:-1]
    span = hl + hr
    d1 = np.stack(
        [-hr / (hl * span), (hr - hl) / (hl * hr), hl / (hr * span)], axis=1
    )
    d2 = np.stack([2.0 / (hl * span), -2.0 / (hl * hr), 2.0 / (hr * span)], axis=1)
    return d1, d2


def _laplacian_general(grid, N):
    r = grid.nodes
    n = grid.n
    d1, d2 = _interior_stencils(r)
    interior = d2 + ((N - 1.0) / r[1:-1])[:, None] * d1

    rows = [np.repeat(np.arange(1, n - 1), 3)]
    cols = [(np.arange(1, n - 1)[:, None] + np.array([-1, 0, 1])).ravel()]
    vals = [interior.ravel()]

    # regular limit at the origin: even extension collapses to
    # N u''(0) ~ 2N (u1 - u0)/r1^2
    c0 = 2.0 * N / r[1] ** 2
    rows.append(np.zeros(2, dtype=int))
    cols.append(np.array([0, 1]))
    vals.append(np.array([-c0, c0]))

    # one-sided four-point row at R, no boundary condition assumed
    tail = r[n - 4 :]
    wb = _deriv_weights(tail, r[-1], 2) + (N - 1.0) / r[-1] * _deriv_weights(
        tail, r[-1], 1
    )
    rows.append(np.full(4, n - 1))
    cols.append(np.arange(n - 4, n))
    vals.append(wb)

    mat = sp.coo_array(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return mat.tocsr()


def _laplacian_clamped(grid, N):
    # rows 0..n-2 of the generic operator with the u(R) = 0 column
    # removed; the boundary row becomes the mirror-ghost value
    # (u_{n-2} - 2*0 + u_ghost)/h^2 with u_ghost = u_{n-2} from u'(R)=0
    n = grid.n
    Lg = grid.laplacian_matrix(N)
    top = sp.csr_array(Lg[: n - 1, : n - 1])
    h_last = grid.nodes[-1] - grid.nodes[-2]
    ghost = sp.coo_array(
        (np.array([2.0 / h_last**2]), (np.array([0]), np.array([n - 2]))),
        shape=(1, n - 1),
    )
    return sp.vstack([top, ghost]).tocsr()


def _cell_masses(grid, N):
    r = grid.nodes
    edges = np.concatenate([[0.0], 0.5 * (r[:-1] + r[1:]), [grid.R]])
    vol = sphere_area(N) / N
    return vol * (edges[1:] ** N - edges[:-1] ** N)


def _ball_weights(grid, N):
    # per-interval cubic interpolatory weights with the r^(N-1) measure
    # folded into the moments; stencils are the four nearest nodes
    r = grid.nodes
    n = grid.n
    omega = sphere_area(N)
    k = np.arange(n - 1)
    j0 = np.clip(k - 1, 0, n - 4)
    stencils = r[j0[:, None] + np.arange(4)]

    center = 0.5 * (r[:-1] + r[1:])
    scale = np.max(np.abs(stencils - center[:, None]), axis=1)
    t = (stencils - center[:, None]) / scale[:, None]

    # moments of ((r - c)/s)^p against r^(N-1) dr over each interval
    q = np.arange(4)
    raw = (r[1:, None] ** (q + N) - r[:-1, None] ** (q + N)) / (q + N)
    moments = np.empty((n - 1, 4))
    for p in range(4):
        binom = [math.comb(p, qq) for qq in range(p + 1)]
        acc = sum(
            binom[qq] * (-center) ** (p - qq) * raw[:, qq] for qq in range(p + 1)
        )
        moments[:, p] = acc / scale**p

    V = t[:, None, :] ** np.arange(4)[None, :, None]
    w = np.linalg.solve(V, moments[:, :, None])[:, :, 0]

    weights = np.zeros(n)
    np.add.at(weights, (j0[:, None] + np.arange(4)).ravel(), w.ravel())
    return omega * weights


def laplacian_radial(u: RadialFunction, N) -> RadialFunction:
    """Pointwise radial Laplacian u'' + (N-1)u'/r on the grid, with the
    regular limit N u''(0) at the origin."""
    if u.grid.n < 5:
        raise ValueError("grid too coarse for the Laplacian stencils")
    vals = u.grid.laplacian_matrix(N) @ u.values
    return RadialFunction(u.grid, vals)


def radial_derivative(u: RadialFunction) -> RadialFunction:
    """Pointwise du/dr via three-point stencils (one-sided at the
    ends)."""
    r = u.grid.nodes
    v = u.values
    d1, _ = _interior_stencils(r)
    out = np.empty_like(v)
    out[1:-1] = np.sum(d1 * np.stack([v[:-2], v[1:-1], v[2:]], axis=1), axis=1)
    out[0] = _deriv_weights(r[:3], r[0], 1) @ v[:3]
    out[-1] = _deriv_weights(r[-3:], r[-1], 1) @ v[-3:]
    return RadialFunction(u.grid, out)


def boundary_derivative(u: RadialFunction) -> float:
    """One-sided four-point estimate of u'(R)."""
    r = u.grid.nodes
    return float(_deriv_weights(r[-4:], r[-1], 1) @ u.values[-4:])


def quad_ball(f: RadialFunction, N) -> float:
    """Integral of f(|x|) over B_R, cubic-exact interpolatory rule."""
    return float(np.dot(f.grid.ball_weights(N), f.values))


def h2_norm(u: RadialFunction, N) -> float:
    """L2 norm of the Laplacian over the ball, the natural norm of the
    clamped problem."""
    lap = laplacian_radial(u, N)
    return math.sqrt(max(quad_ball(RadialFunction(u.grid, lap.values**2), N), 0.0))


def biharmonic_solve(f: RadialFunction, N) -> RadialFunction:
    """Clamped solution of the fourth-order problem (bilaplacian of u
    equals f) in the discrete weak sense, via a banded direct solve."""
    grid = f.grid
    rhs = (grid.ball_weights(N) * f.values)[: grid.n - 1]
    x = grid._plate_solve(N)(rhs)
    if not np.all(np.isfinite(x)):
        raise NumericsError("biharmonic solve produced non-finite values")
    return RadialFunction(grid, np.append(x, 0.0))


def bilaplacian_clamped(u: RadialFunction, N) -> RadialFunction:
    """Composed finite-difference bilaplacian of a clamped function:
    the generic Laplacian applied to the boundary-aware Laplacian."""
    grid = u.grid
    inner = grid.laplacian_clamped_matrix(N) @ u.values[: grid.n - 1]
    return RadialFunction(grid, grid.laplacian_matrix(N) @ inner)


def _inverse_power(solve, K_mul, M_mul, x0, tol, maxiter):
    x = x0 / math.sqrt(float(x0 @ M_mul(x0)))
    rho_prev = None
    for _ in range(maxiter):
        y = solve(M_mul(x))
        norm_sq = float(y @ M_mul(y))
        if not (norm_sq > 0.0) or not math.isfinite(norm_sq):
            raise NumericsError("eigen iteration left the definite cone")
        y /= math.sqrt(norm_sq)
        rho = float(y @ K_mul(y))
        if rho_prev is not None and abs(rho - rho_prev) <= tol * abs(rho):
            return rho, y
        rho_prev = rho
        x = y
    raise ConvergenceError(
        f"inverse power iteration did not settle in {maxiter} steps"
    )


def _normalized_mode(grid, N, full_values):
    u = RadialFunction(grid, full_values)
    if float(np.sum(full_values)) < 0.0:
        u.values = -u.values
    mass = quad_ball(RadialFunction(grid, u.values**2), N)
    u.values = u.values / math.sqrt(mass)
    return u


def first_eigen_clamped_pair(grid, N, tol=1e-10, maxiter=200):
    """Smallest clamped-plate eigenvalue on B_R with its eigenfunction
    (positive orientation, unit L2 mass)."""
    K = grid.stiffness(N)
    m = grid.cell_masses(N)[: grid.n - 1]
    solve = grid._plate_solve(N)
    x0 = (1.0 - (grid.nodes[: grid.n - 1] / grid.R) ** 2) ** 2
    lam, x = _inverse_power(solve, lambda v: K @ v, lambda v: m * v, x0, tol, maxiter)
    return lam, _normalized_mode(grid, N, np.append(x, 0.0))


def first_eigen_clamped(grid, N, tol=1e-10, maxiter=200) -> float:
    """Smallest eigenvalue of the clamped bilaplacian on B_R, by inverse
    power iteration; converged when successive Rayleigh quotients agree
    to the given relative tolerance."""
    return first_eigen_clamped_pair(grid, N, tol, maxiter)[0]


def _laplace_pencil(grid, N):
    r = grid.nodes
    n = grid.n
    mid = 0.5 * (r[:-1] + r[1:])
    kappa = sphere_area(N) * mid ** (N - 1) / np.diff(r)
    diag = kappa.copy()
    diag[1:] += kappa[:-1]
    T = sp.diags_array(
        [diag[: n - 1], -kappa[: n - 2], -kappa[: n - 2]], offsets=[0, 1, -1]
    ).tocsc()
    return T, grid.cell_masses(N)[: n - 1]


def first_eigen_laplace_pair(grid, N, tol=1e-10, maxiter=200):
    """Smallest Dirichlet eigenvalue of minus-the-Laplacian on B_R with
    its eigenfunction (no derivative clamp at R)."""
    T, m = _laplace_pencil(grid, N)

    def build():
        try:
            return splu(T)
        except RuntimeError as exc:
            raise NumericsError("singular discrete Laplacian") from exc

    lu = grid._memo(("lap_lu", N), build)
    x0 = 1.0 - (grid.nodes[: grid.n - 1] / grid.R) ** 2
    lam, x = _inverse_power(lu.solve, lambda v: T @ v, lambda v: m * v, x0, tol, maxiter)
    return lam, _normalized_mode(grid, N, np.append(x, 0.0))


def first_eigen_laplace(grid, N, tol=1e-10, maxiter=200) -> float:
    return first_eigen_laplace_pair(grid, N, tol, maxiter)[0]


def _first_sign_change(fn, lo, hi, step):
    k = lo
    f_prev = fn(k)
    while k < hi:
        k_next = min(k + step, hi)
        f_next = fn(k_next)
        if f_prev == 0.0:
            return k, k
        if f_prev * f_next < 0.0:
            return k, k_next
        k, f_prev = k_next, f_next
    raise NumericsError("no sign change located in the scan window")


def plate_eigenvalue_bessel(N, R=1.0) -> float:
    """Closed-form first clamped-plate eigenvalue on B_R: the fourth
    power of the first crossing of

        J_nu(k) I_{nu+1}(k) + I_nu(k) J_{nu+1}(k),  nu = N/2 - 1,

    scaled by R^-4.  Independent of the finite-difference route; the
    exponentially scaled Bessel I keeps the expression stable."""
    _check_dimension(N)
    nu = N / 2.0 - 1.0

    def crossing(k):
        return jv(nu, k) * ive(nu + 1, k) + ive(nu, k) * jv(nu + 1, k)

    lo, hi = _first_sign_change(crossing, 1.0, 40.0, 0.05)
    k_root = brentq(crossing, lo, hi, xtol=1e-13, rtol=1e-15) if lo < hi else lo
    return k_root**4 / R**4


def laplace_eigenvalue_bessel(N, R=1.0) -> float:
    """Closed-form first Dirichlet Laplacian eigenvalue on B_R: the
    square of the first zero of J_{N/2-1}, scaled by R^-2."""
    _check_dimension(N)
    nu = N / 2.0 - 1.0
    lo, hi = _first_sign_change(lambda k: jv(nu, k), max(nu, 0.5), nu + 12.0, 0.1)
    k_root = brentq(lambda k: jv(nu, k), lo, hi, xtol=1e-13, rtol=1e-15) if lo < hi else lo
    return k_root**2 / R**2


def compute_constants(p: Params, n=1024, kind="uniform", method="bessel") -> Constants:
    """Bundle the derived scalars for a parameter set.

    method="bessel" takes the eigenvalues from the closed-form Bessel
    crossings (exact up to root finding); method="fd" runs the discrete
    eigensolvers on a fresh grid of n nodes.
    """
    if method == "bessel":
        lam1 = plate_eigenvalue_bessel(p.N, p.R)
        lam1_lap = laplace_eigenvalue_bessel(p.N, p.R)
    elif method == "fd":
        grid = RadialGrid(p.R, n, kind=kind)
        lam1 = first_eigen_clamped(grid, p.N)
        lam1_lap = first_eigen_laplace(grid, p.N)
    else:
        raise ValueError(f"unknown eigenvalue method {method!r}")
    return Constants.derive(p, lam1, lam1_lap)
