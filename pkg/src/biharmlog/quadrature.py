"""Composite Gauss-Legendre panels on an interval.

Small, allocation-light helper used wherever high-accuracy 1-D
integrals are needed (bubble norms, whole-space cross-checks).  Grid
quadrature on radial meshes lives in `discretization`; this module is
for integrands given as callables.
"""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def _gl(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def edge_panels(edges, order):
    """Nodes and weights of a composite Gauss-Legendre rule with
    prescribed panel edges (strictly increasing)."""
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0.0):
        raise ValueError("edges must be strictly increasing")
    x, w = _gl(order)
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    nodes = (mid + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def panel_nodes(a, b, panels, order):
    """Nodes and weights of a composite Gauss-Legendre rule on [a, b]."""
    if not (b > a):
        raise ValueError("empty integration interval")
    return edge_panels(np.linspace(a, b, panels + 1), order)


def gauss_panels(f, a, b, panels=64, order=12):
    """Integrate a vectorized callable over [a, b]."""
    nodes, weights = panel_nodes(a, b, panels, order)
    return float(np.dot(weights, f(nodes)))
