"""Adam with separate learning rates for the mean and log-variance blocks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8

    @classmethod
    def zeros(cls, size: int, **hyper) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0, **hyper)


def adam_step(state: AdamState, theta, grad, lr_mean: float, lr_logvar: float):
    """One descent step; returns ``(new_state, new_theta)``.

    ``theta`` and ``grad`` are 2n-vectors laid out as (mean, logvar); the first
    half moves with ``lr_mean`` and the second with ``lr_logvar``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if theta.shape != grad.shape or theta.shape != state.m.shape:
        raise ValueError(f"shape mismatch: theta {theta.shape}, grad {grad.shape}, state {state.m.shape}")
    if not np.all(np.isfinite(grad)):
        raise ValueError("gradient must be finite")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    n = theta.size // 2
    lr = np.empty_like(theta)
    lr[:n] = lr_mean
    lr[n:] = lr_logvar
    new_theta = theta - lr * m_hat / (np.sqrt(v_hat) + state.eps_hat)
    return AdamState(m, v, t, state.beta1, state.beta2, state.eps_hat), new_theta
