"""Deterministic profile generators: clamped test functions for
property tests and starting guesses for the solvers.

Randomness is always drawn from a Philox generator keyed by an explicit
seed plus a spawn key, so any profile in any test is reproducible from
the single seed that named it.
"""

from __future__ import annotations

import numpy as np

from .discretization import RadialFunction

__all__ = ["rng_for", "clamp_factor", "random_clamped", "positive_bump", "corpus"]


def rng_for(seed, *key):
    """Independent generator for (seed, key...); distinct keys give
    statistically independent streams from the same seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def clamp_factor(grid):
    """(1 - (r/R)^2)^2: vanishes to second order at R, so multiplying
    by it enforces both clamped boundary conditions."""
    s = grid.nodes / grid.R
    return (1.0 - s * s) ** 2


def random_clamped(grid, rng, amplitude=1.0, components=3):
    """Sign-mixed sum of radial Gaussian humps under the clamp factor,
    rescaled to the requested sup amplitude."""
    s = grid.nodes / grid.R
    vals = np.zeros(grid.n)
    for _ in range(components):
        center = rng.uniform(0.0, 0.75)
        width = rng.uniform(0.08, 0.45)
        vals += rng.normal(0.0, 1.0) * np.exp(-(((s - center) / width) ** 2))
    vals *= clamp_factor(grid)
    peak = np.max(np.abs(vals))
    if peak < 1e-12:
        # astronomically unlikely cancellation; fall back to one hump
        vals = clamp_factor(grid) * np.exp(-4.0 * s * s)
        peak = np.max(vals)
    return RadialFunction(grid, vals * (amplitude / peak))


def positive_bump(grid, sharpness=4.0, amplitude=1.0):
    """Smooth positive clamped hump centered at the origin."""
    s = grid.nodes / grid.R
    vals = clamp_factor(grid) * np.exp(-sharpness * s * s)
    return RadialFunction(grid, vals * (amplitude / np.max(vals)))


def corpus(grid, count, seed, amplitude=1.0):
    """Reproducible list of random clamped profiles."""
    return [
        random_clamped(grid, rng_for(seed, 7, i), amplitude=amplitude)
        for i in range(count)
    ]
