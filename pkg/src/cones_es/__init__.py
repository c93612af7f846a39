"""Evolutionary strategies with exact natural gradients and KL-ball (CoNES) refinement."""

from .belief import (
    BeliefParams,
    CandidateBatch,
    kl_divergence,
    kl_from_delta,
    sample_antithetic,
    score,
)
from .cones import ConesSolution, bruteforce_solve, solve, stationary_delta
from .estimator import centered_ranks, es_gradient, es_gradient_plain
from .harness import RunConfig, RunRecord, emit, run, sweep
from .natgrad import fisher_diagonal, fisher_rao_norm, natural_gradient
from .optimizer import AdamState, adam_step

__version__ = "0.1.0"
