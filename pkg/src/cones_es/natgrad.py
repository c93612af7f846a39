"""Exact natural gradient for the diagonal-Gaussian family.

In (mean, log-variance) coordinates the Fisher information is diagonal with
entries ``1 / sigma_i**2`` on the mean block and ``1/2`` on the log-variance
block, so no estimation is needed.
"""

from __future__ import annotations

import numpy as np

from .belief import BeliefParams


def _check(params: BeliefParams, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (2 * params.dim,):
        raise ValueError(f"expected a vector of length {2 * params.dim}, got shape {v.shape}")
    return v


def fisher_diagonal(params: BeliefParams) -> np.ndarray:
    return np.concatenate([np.exp(-params.logvar), np.full(params.dim, 0.5)])


def natural_gradient(params: BeliefParams, g) -> np.ndarray:
    g = _check(params, g)
    n = params.dim
    return np.concatenate([params.var * g[:n], 2.0 * g[n:]])


def fisher_rao_norm(params: BeliefParams, v) -> float:
    v = _check(params, v)
    return float(np.sqrt(np.sum(fisher_diagonal(params) * v * v)))
