"""Sphere, Rosenbrock, Rastrigin and Lunacek at arbitrary dimension.

Every function takes a single point ``(n,)`` or a batch ``(N, n)`` and returns
a float or an ``(N,)`` array.
"""

from __future__ import annotations

import math

import numpy as np

LUNACEK_MU1 = 2.5
LUNACEK_D = 1.0


def _as_points(x, min_dim=1):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] < min_dim:
        raise ValueError(f"expected points with at least {min_dim} coordinates, got shape {x.shape}")
    return x


def _out(x, value):
    return float(value) if x.ndim == 1 else value


def sphere(x):
    x = _as_points(x)
    return _out(x, np.sum(x * x, axis=-1))


def rosenbrock(x):
    x = _as_points(x, min_dim=2)
    head, tail = x[..., :-1], x[..., 1:]
    return _out(x, np.sum(100.0 * (head * head - tail) ** 2 + (1.0 - head) ** 2, axis=-1))


def rastrigin(x):
    x = _as_points(x)
    n = x.shape[-1]
    return _out(x, 10.0 * n + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x), axis=-1))


def lunacek_constants(n: int) -> tuple[float, float, float, float]:
    """Return ``(mu1, mu2, s, d)`` for dimension ``n``.

    For ``n = 1`` the scale ``s`` is negative and the second basin centre is
    not real, so the function is only defined from two dimensions up.
    """
    if n < 2:
        raise ValueError(f"lunacek needs at least 2 dimensions, got {n}")
    s = 1.0 - 1.0 / (2.0 * math.sqrt(n + 20) - 8.2)
    mu2 = -math.sqrt((LUNACEK_MU1**2 - LUNACEK_D) / s)
    return LUNACEK_MU1, mu2, s, LUNACEK_D


def lunacek(x):
    x = _as_points(x, min_dim=2)
    n = x.shape[-1]
    mu1, mu2, s, d = lunacek_constants(n)
    near = np.sum((x - mu1) ** 2, axis=-1)
    far = d * n + s * np.sum((x - mu2) ** 2, axis=-1)
    ripple = 10.0 * np.sum(1.0 - np.cos(2.0 * np.pi * (x - mu1)), axis=-1)
    return _out(x, np.minimum(near, far) + ripple)


BENCHMARKS = {
    "sphere": sphere,
    "rosenbrock": rosenbrock,
    "rastrigin": rastrigin,
    "lunacek": lunacek,
}


def get(name: str):
    try:
        return BENCHMARKS[name]
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None
