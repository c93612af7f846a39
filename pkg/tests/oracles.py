"""Shared brute-force set-up for the KL-ball program."""

import math

import numpy as np
from scipy.optimize import brentq

from cones_es.cones import bruteforce_solve


def logvar_range(budget):
    # all d with exp(d) - 1 - d <= budget
    f = lambda d: math.expm1(d) - d - budget
    return brentq(f, -budget - 2.0, 0.0, xtol=1e-14), brentq(f, 0.0, 60.0, xtol=1e-14)


def kl_box(params, epsilon):
    """Bounding box of the feasible increments (each term alone may use the whole budget)."""
    budget = 2.0 * epsilon**2
    reach = params.std * math.sqrt(budget)
    lo, hi = logvar_range(budget)
    return [(-r, r) for r in reach] + [(lo, hi)] * params.dim


def kl_feasible(params, epsilon):
    var, n, cap = params.var, params.dim, epsilon**2

    def feasible(X):
        dm, de = X[:, :n], X[:, n:]
        return 0.5 * np.sum(np.expm1(de) - de + dm * dm / var, axis=1) <= cap

    return feasible


def grid_optimum(params, g, epsilon, resolution=1e-5, rounds=4):
    g = np.asarray(g, dtype=float)
    return bruteforce_solve(
        lambda X: X @ g,
        kl_feasible(params, epsilon),
        kl_box(params, epsilon),
        resolution,
        rounds=rounds,
        window=1,
        vectorized=True,
        radial=True,
    )
