"""Monte-Carlo ES gradient estimate with rank-based fitness shaping."""

from __future__ import annotations

import numpy as np

from .belief import BeliefParams, CandidateBatch, score


def centered_ranks(losses) -> np.ndarray:
    """Map losses to utilities ``rank / (N - 1) - 0.5``.

    Rank 0 is the lowest loss; ties keep candidate order (stable sort), so the
    best candidate gets -0.5 and the worst +0.5.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 1 or losses.size < 2:
        raise ValueError("need at least two losses to rank")
    if not np.all(np.isfinite(losses)):
        bad = int(np.flatnonzero(~np.isfinite(losses))[0])
        raise ValueError(f"non-finite loss at candidate {bad}")
    order = np.argsort(losses, kind="stable")
    ranks = np.empty(losses.size)
    ranks[order] = np.arange(losses.size)
    return ranks / (losses.size - 1) - 0.5


def _weighted_score(params: BeliefParams, batch: CandidateBatch, weights) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (batch.size,):
        raise ValueError(f"got {weights.size} losses for a batch of {batch.size} candidates")
    # fixed-order reduction; evaluation order never enters
    return weights @ score(params, batch.points) / batch.size


def es_gradient(params: BeliefParams, batch: CandidateBatch, losses) -> np.ndarray:
    """Rank-shaped gradient ``(1/N) sum_i u_i * score(x_i)`` of length 2n.

    Positive inner product with a direction means the loss is expected to
    grow along it, so optimizers subtract this.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.shape != (batch.size,):
        raise ValueError(f"got {losses.size} losses for a batch of {batch.size} candidates")
    return _weighted_score(params, batch, centered_ranks(losses))


def es_gradient_plain(params: BeliefParams, batch: CandidateBatch, losses) -> np.ndarray:
    """Same average with raw losses as weights (unbiased for the expected-loss gradient)."""
    losses = np.asarray(losses, dtype=np.float64)
    if losses.shape == (batch.size,) and not np.all(np.isfinite(losses)):
        raise ValueError("losses must be finite")
    return _weighted_score(params, batch, losses)


def split(g) -> tuple[np.ndarray, np.ndarray]:
    """Return the (mean, logvar) blocks of a 2n-vector."""
    g = np.asarray(g)
    n = g.size // 2
    return g[:n], g[n:]
