"""KL-ball refinement of a gradient estimate.

Solves

    maximize    <g, delta>
    subject to  KL(P_{theta + delta} || P_theta) <= epsilon**2

for a diagonal-Gaussian belief in (mean, logvar) coordinates.  The constraint
is separable, so the KKT conditions give the maximizer in closed form for a
fixed multiplier ``lam``:

    d_mean   = sigma**2 * g_mean / lam
    d_logvar = log(1 + 2 * g_logvar / lam)

and the KL of that point is strictly decreasing in ``lam`` on
``(lam_min, inf)`` with ``lam_min = max(0, max(-2 * g_logvar))``.  A scalar
root search on the multiplier therefore solves the whole program in O(n) per
evaluation.

When a coordinate pins ``lam_min`` and the radius is large, the root sits
astronomically close to ``lam_min`` (``lam - lam_min ~ exp(-2 eps**2)``), so the
search runs over ``t = log(lam - lam_min)`` rather than ``lam`` itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .belief import BeliefParams, kl_from_delta


class DomainError(ValueError):
    """Multiplier outside the dual domain ``(lam_min, inf)``."""


class SolverFailure(RuntimeError):
    pass


class InfeasibleError(ValueError):
    pass


MAX_DOUBLINGS = 200
MAX_BISECTIONS = 2000


@dataclass(frozen=True)
class ConesSolution:
    delta: np.ndarray
    dual: float  # nan when g == 0
    achieved_kl: float
    objective: float


def _blocks(params: BeliefParams, g):
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (2 * params.dim,):
        raise ValueError(f"expected a gradient of length {2 * params.dim}, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient must be finite")
    n = params.dim
    return g, g[:n], g[n:]


def lambda_min(g_logvar) -> float:
    return max(0.0, float(np.max(-2.0 * np.asarray(g_logvar))))


def stationary_delta(params: BeliefParams, g, lam: float) -> np.ndarray:
    """KKT point of the Lagrangian for a given multiplier ``lam``."""
    g, g_mean, g_logvar = _blocks(params, g)
    lmin = lambda_min(g_logvar)
    if not lam > lmin:
        raise DomainError(f"multiplier {lam!r} must exceed {lmin!r}")
    arg = 1.0 + 2.0 * g_logvar / lam
    if np.any(arg <= 0.0):
        raise DomainError("log argument is not positive")
    return np.concatenate([params.var * g_mean / lam, np.log(arg)])


def _log1p_excess(u):
    # u - log1p(u), series near zero to keep relative accuracy
    out = u - np.log1p(u)
    small = np.abs(u) < 1e-3
    if np.any(small):
        us = u[small]
        out[small] = us * us * (0.5 - us * (1.0 / 3 - us * (0.25 - us / 5)))
    return out


class _Dual:
    """KL of the stationary point as a function of ``t = log(lam - lam_min)``.

    ``g`` is pre-scaled to unit max-norm; the solution only depends on its
    direction.
    """

    def __init__(self, params: BeliefParams, g_mean, g_logvar):
        self.var = params.var
        self.g_mean = g_mean
        self.g_logvar = g_logvar
        self.mean_num = self.var * g_mean * g_mean
        self.lmin = lambda_min(g_logvar)
        # 1 + 2 g / lam == (s + c) / lam  with s = lam - lmin
        self.c = np.maximum(self.lmin + 2.0 * g_logvar, 0.0)
        self.pinned = (self.c == 0.0) & (g_logvar != 0.0)

    def _terms(self, t):
        s = math.exp(t)
        lam = self.lmin + s
        u = 2.0 * self.g_logvar / lam
        near = u < -0.5
        # pinned coordinates hit log1p(-1); they are overwritten below
        with np.errstate(divide="ignore", invalid="ignore"):
            d_logvar = np.log1p(u)
            excess = _log1p_excess(u)
        if np.any(near):
            ratio = (s + self.c[near]) / lam
            with np.errstate(divide="ignore"):
                dl = np.log(ratio)
            pinned = self.pinned[near]
            dl[pinned] = t - math.log(lam)
            d_logvar[near] = dl
            excess[near] = ratio - 1.0 - dl
        return lam, d_logvar, excess

    def kl(self, t) -> float:
        lam, _, excess = self._terms(t)
        return 0.5 * float(np.sum(excess + self.mean_num / (lam * lam)))

    def delta(self, t):
        lam, d_logvar, _ = self._terms(t)
        return lam, np.concatenate([self.var * self.g_mean / lam, d_logvar])


def _root(dual: _Dual, target: float) -> float:
    tol = 1e-12 * target
    t0 = math.log(dual.lmin) if dual.lmin > 0 else 0.0

    def f(t):
        return dual.kl(t) - target

    f0 = f(t0)
    if f0 == 0.0:
        return t0
    # expand away from t0 until the sign flips
    direction = 1.0 if f0 > 0 else -1.0
    step = 1.0
    prev = t0
    for _ in range(MAX_DOUBLINGS):
        t = t0 + direction * step
        ft = f(t)
        if not math.isfinite(ft):
            ft = math.inf
        if (ft < 0) if direction > 0 else (ft > 0):
            break
        prev = t
        step *= 2.0
    else:
        raise SolverFailure(f"could not bracket the multiplier after {MAX_DOUBLINGS} doublings")
    lo, hi = (prev, t) if direction > 0 else (t, prev)
    # f(lo) > 0 > f(hi)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if abs(fm) <= tol:
            return mid
        if fm > 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(f(lo)) < abs(f(hi)) else hi


def solve(params: BeliefParams, g, epsilon: float) -> ConesSolution:
    """Maximize ``<g, delta>`` over the KL ball of radius ``epsilon**2``.

    Returns the zero step (with ``dual = nan``) when ``g`` is identically zero.
    """
    if not (isinstance(epsilon, (int, float, np.floating)) and epsilon > 0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be a positive finite number, got {epsilon!r}")
    g, _, _ = _blocks(params, g)
    scale = float(np.max(np.abs(g)))
    if scale == 0.0:
        return ConesSolution(np.zeros_like(g), math.nan, 0.0, 0.0)
    gs = g / scale
    n = params.dim
    dual = _Dual(params, gs[:n], gs[n:])
    t = _root(dual, float(epsilon) ** 2)
    lam, delta = dual.delta(t)
    return ConesSolution(
        delta=delta,
        dual=lam * scale,
        achieved_kl=kl_from_delta(params, delta),
        objective=float(g @ delta),
    )


def _sphere_directions(angles: np.ndarray, m: int) -> np.ndarray:
    # hyperspherical angles -> unit vectors; (K, max(m-1, 1)) -> (K, m)
    if m == 1:
        return np.where(np.cos(angles[:, :1]) >= 0, 1.0, -1.0)
    out = np.empty((angles.shape[0], m))
    tail = np.ones(angles.shape[0])
    for i in range(m - 1):
        out[:, i] = tail * np.cos(angles[:, i])
        tail = tail * np.sin(angles[:, i])
    out[:, m - 1] = tail
    return out


def _axis(lo, hi, h):
    count = int(math.floor((hi - lo) / h + 1e-9)) + 1
    ax = lo + h * np.arange(count)
    if ax[-1] < hi:
        ax = np.append(ax, hi)
    return ax


def bruteforce_solve(
    objective: Callable,
    feasible: Callable,
    box: Sequence[tuple[float, float]],
    resolution: float,
    *,
    rounds: int = 3,
    window: int = 2,
    vectorized: bool = False,
    radial: bool = False,
    center=None,
    max_points: int = 5_000_000,
):
    """Grid-search maximizer used as a validation oracle.

    The first grid has spacing ``resolution * 10**rounds``; each of the
    ``rounds`` refinements re-grids ``+-window`` old cells around the incumbent
    at a tenth of the spacing, so the last pass runs at ``resolution``.

    By default the grid is Cartesian over ``box``.  With ``radial=True`` the
    grid runs over hyperspherical direction angles plus a radius fraction in
    [0, 1], measured from ``center`` (default: the origin) out to the boundary
    of the feasible set, which is located per ray by bisection on ``feasible``.
    Candidates on the boundary are then exact, which matters when the optimum
    lies on a curved constraint.  Radial mode assumes the feasible set is
    star-shaped around ``center`` (true for convex sets containing it).

    With ``vectorized=True`` both callables receive a ``(K, m)`` array and
    return length-``K`` arrays.  Returns ``(value, argmax)``.
    """
    box = np.asarray(box, dtype=np.float64).reshape(-1, 2)
    m = box.shape[0]
    if m > 4:
        raise ValueError("grid oracle supports at most 4 variables")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if np.any(box[:, 1] < box[:, 0]):
        raise ValueError("box bounds must satisfy lo <= hi")

    if vectorized:
        feas_v = lambda X: np.asarray(feasible(X), dtype=bool).reshape(len(X))  # noqa: E731
        obj_v = lambda X: np.asarray(objective(X), dtype=np.float64).reshape(len(X))  # noqa: E731
    else:
        feas_v = lambda X: np.array([bool(feasible(x)) for x in X], dtype=bool)  # noqa: E731
        obj_v = lambda X: np.array([objective(x) for x in X], dtype=np.float64)  # noqa: E731

    if radial:
        c = np.zeros(m) if center is None else np.asarray(center, dtype=np.float64).reshape(m)
        if np.any(c < box[:, 0]) or np.any(c > box[:, 1]) or not feas_v(c[None, :])[0]:
            raise InfeasibleError("radial search center must be feasible and inside the box")
        n_ang = max(m - 1, 1)
        search = [(0.0, math.pi)] * (n_ang - 1) + [(0.0, math.pi if m == 1 else 2.0 * math.pi), (0.0, 1.0)]
        search = np.array(search)
        clip = np.zeros(len(search), dtype=bool)
        clip[-1] = True

        def ray_lengths(dirs):
            with np.errstate(divide="ignore", invalid="ignore"):
                t_hi = np.where(dirs > 0, (box[:, 1] - c) / dirs, np.inf)
                t_lo = np.where(dirs < 0, (box[:, 0] - c) / dirs, np.inf)
            r_max = np.minimum(t_hi, t_lo).min(axis=1)
            lo, hi = np.zeros_like(r_max), r_max.copy()
            at_box = feas_v(c + hi[:, None] * dirs)
            for _ in range(64):
                mid = 0.5 * (lo + hi)
                ok = feas_v(c + mid[:, None] * dirs)
                lo = np.where(ok, mid, lo)
                hi = np.where(ok, hi, mid)
            return np.where(at_box, r_max, lo)

        def points(axes):
            ang = np.stack(np.meshgrid(*axes[:-1], indexing="ij"), axis=-1).reshape(-1, n_ang)
            dirs = _sphere_directions(ang, m)
            reach = ray_lengths(dirs)[:, None] * dirs
            frac = axes[-1]
            return (c + frac[None, :, None] * reach[:, None, :]).reshape(-1, m)
    else:
        search = box
        clip = np.ones(m, dtype=bool)

        def points(axes):
            return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)

    def evaluate(axes):
        size = math.prod(a.size for a in axes)
        if size > max_points:
            raise ValueError(f"grid of {size} points exceeds max_points={max_points}")
        U = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
        X = points(axes)
        ok = feas_v(X)
        if not ok.any():
            return None
        vals = np.full(len(X), -np.inf)
        vals[ok] = obj_v(X[ok])
        vals = np.where(np.isnan(vals), -np.inf, vals)
        k = int(np.argmax(vals))
        if not ok[k]:
            return None
        return float(vals[k]), X[k], U[k]

    h = resolution * 10.0**rounds
    best = evaluate([_axis(lo, hi, h) for lo, hi in search])
    if best is None:
        raise InfeasibleError("no feasible grid point")
    for _ in range(rounds):
        h /= 10.0
        offsets = h * np.arange(-10 * window, 10 * window + 1)
        axes = []
        for i, (lo, hi) in enumerate(search):
            ax = best[2][i] + offsets
            axes.append(np.unique(np.clip(ax, lo, hi)) if clip[i] else ax)
        cand = evaluate(axes)
        if cand is not None and cand[0] >= best[0]:
            best = cand
    return best[0], best[1]
