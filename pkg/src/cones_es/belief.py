"""Diagonal-Gaussian belief distribution in (mean, log-variance) coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _frozen(a, name):
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BeliefParams:
    """Mean vector and log-variance vector of a diagonal Gaussian.

    ``logvar[i] = log(sigma_i ** 2)``, so every implied standard deviation is
    positive without clipping.
    """

    mean: np.ndarray
    logvar: np.ndarray

    def __post_init__(self):
        mean = _frozen(self.mean, "mean")
        logvar = _frozen(self.logvar, "logvar")
        if mean.size < 1:
            raise ValueError("belief dimension must be at least 1")
        if mean.shape != logvar.shape:
            raise ValueError(f"mean has {mean.size} entries but logvar has {logvar.size}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(logvar))):
            raise ValueError("belief parameters must be finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "logvar", logvar)

    @classmethod
    def isotropic(cls, dim: int, mean: float = 0.0, std: float = 1.0) -> "BeliefParams":
        if dim < 1:
            raise ValueError("dim must be positive")
        if not std > 0:
            raise ValueError("std must be positive")
        return cls(np.full(dim, float(mean)), np.full(dim, 2.0 * np.log(std)))

    @classmethod
    def from_theta(cls, theta) -> "BeliefParams":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.ndim != 1 or theta.size % 2:
            raise ValueError("theta must be a vector of even length 2n")
        n = theta.size // 2
        return cls(theta[:n], theta[n:])

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def var(self) -> np.ndarray:
        return np.exp(self.logvar)

    @property
    def std(self) -> np.ndarray:
        return np.exp(0.5 * self.logvar)

    @property
    def theta(self) -> np.ndarray:
        """Flat parameter vector ``(mean, logvar)`` of length 2n."""
        return np.concatenate([self.mean, self.logvar])

    def shifted(self, delta) -> "BeliefParams":
        delta = _check_delta(self, delta)
        n = self.dim
        return BeliefParams(self.mean + delta[:n], self.logvar + delta[n:])

    def __eq__(self, other):
        if not isinstance(other, BeliefParams):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.logvar, other.logvar)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class CandidateBatch:
    """Candidates drawn around a belief mean.

    For antithetic batches ``points[2k] = mean + std * base_noise[k]`` and
    ``points[2k + 1] = mean - std * base_noise[k]``.  Independent batches
    carry one noise row per point.
    """

    points: np.ndarray
    base_noise: np.ndarray
    antithetic: bool = True

    @property
    def size(self) -> int:
        return self.points.shape[0]


def _check_delta(params: BeliefParams, delta) -> np.ndarray:
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (2 * params.dim,):
        raise ValueError(f"expected a vector of length {2 * params.dim}, got shape {delta.shape}")
    return delta


def antithetic_batch(params: BeliefParams, noise) -> CandidateBatch:
    """Build the mirrored batch for a given ``(N/2, n)`` array of base noise."""
    noise = np.array(noise, dtype=np.float64, ndmin=2)
    if noise.shape[1] != params.dim:
        raise ValueError(f"noise has {noise.shape[1]} columns, belief has dimension {params.dim}")
    scaled = params.std * noise
    points = np.empty((2 * noise.shape[0], params.dim))
    points[0::2] = params.mean + scaled
    points[1::2] = params.mean - scaled
    return CandidateBatch(points, noise, antithetic=True)


def sample_antithetic(params: BeliefParams, num: int, rng: np.random.Generator) -> CandidateBatch:
    """Draw ``num`` candidates as ``num // 2`` mirrored pairs.

    All base noise is drawn from ``rng`` up front, so the batch depends only on
    the belief, ``num`` and the stream state.
    """
    if isinstance(num, bool) or int(num) != num or num < 2 or num % 2:
        raise ValueError(f"number of candidates must be a positive even integer, got {num!r}")
    noise = rng.standard_normal((int(num) // 2, params.dim))
    return antithetic_batch(params, noise)


def sample_independent(params: BeliefParams, num: int, rng: np.random.Generator) -> CandidateBatch:
    # Non-mirrored draws; only used to check the plain estimator is unbiased.
    if int(num) != num or num < 1:
        raise ValueError(f"number of candidates must be positive, got {num!r}")
    noise = rng.standard_normal((int(num), params.dim))
    return CandidateBatch(params.mean + params.std * noise, noise, antithetic=False)


def score(params: BeliefParams, x) -> np.ndarray:
    """Gradient of ``log p(x)`` w.r.t. ``(mean, logvar)``.

    Accepts a single point of shape ``(n,)`` or a stack ``(N, n)`` and returns
    ``(2n,)`` or ``(N, 2n)`` respectively.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (params.dim,) or x.ndim > 2:
        raise ValueError(f"point dimension {x.shape} does not match belief dimension {params.dim}")
    inv_var = np.exp(-params.logvar)
    diff = x - params.mean
    s_mean = diff * inv_var
    s_logvar = 0.5 * (diff * s_mean - 1.0)
    return np.concatenate([s_mean, s_logvar], axis=-1)


def exp_excess(d) -> np.ndarray:
    """``exp(d) - 1 - d`` without cancellation for small ``|d|``."""
    d = np.asarray(d, dtype=np.float64)
    flat = np.atleast_1d(d)
    out = np.expm1(flat) - flat
    small = np.abs(flat) < 1e-3
    if np.any(small):
        ds = flat[small]
        out[small] = ds * ds * (0.5 + ds * (1.0 / 6 + ds * (1.0 / 24 + ds / 120)))
    return out.reshape(d.shape)


def kl_divergence(p: BeliefParams, q: BeliefParams) -> float:
    """KL(P_p || P_q) for two diagonal Gaussians of equal dimension."""
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    var_p, var_q = np.exp(p.logvar), np.exp(q.logvar)
    dmean = p.mean - q.mean
    terms = 1.0 + np.log(var_p) - np.log(var_q) - dmean**2 / var_q - var_p / var_q
    return float(max(-0.5 * np.sum(terms), 0.0))


def kl_from_delta(params: BeliefParams, delta) -> float:
    """KL(P_{theta + delta} || P_theta) written directly in the increment.

    Equals ``0.5 * sum(exp(d_eta) - 1 - d_eta + d_mu**2 / sigma**2)``, which is
    separable and convex in ``delta``.
    """
    delta = _check_delta(params, delta)
    n = params.dim
    dmean, dlogvar = delta[:n], delta[n:]
    terms = exp_excess(dlogvar) + dmean * dmean * np.exp(-params.logvar)
    return float(0.5 * np.sum(terms))
