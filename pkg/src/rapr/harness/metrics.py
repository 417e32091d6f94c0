"""Regret and cover metrics computed from the environment's true mean rewards."""
from __future__ import annotations

import numpy as np

from ..core import RunTrace


def estimate_cumulative_regret(trace: RunTrace, env) -> float:
    """Sum over rounds of ``max_a f*(x_t, a) - E_{a ~ p_t} f*(x_t, a)``."""
    mu = env.mean_rewards(trace.contexts)
    per_round = mu.max(axis=1) - np.sum(trace.probs * mu, axis=1)
    return float(per_round.sum())


def exploration_mean_reward(trace: RunTrace, env) -> float:
    """Average expected reward of the logging distributions over the run."""
    mu = env.mean_rewards(trace.contexts)
    return float(np.mean(np.sum(trace.probs * mu, axis=1)))


def policy_value(policy, env, X: np.ndarray) -> float:
    mu = env.mean_rewards(X)
    return float(np.mean(np.sum(policy.probs(X) * mu, axis=1)))


def simple_regret_on(policy, env, X: np.ndarray) -> np.ndarray:
    """Per-context regret against the greedy policy of ``f*``."""
    mu = env.mean_rewards(X)
    chosen = np.sum(policy.probs(X) * mu, axis=1)
    return mu.max(axis=1) - chosen


def estimate_simple_regret(policy, env, n_contexts: int, rng: np.random.Generator) -> tuple[float, float]:
    """Monte-Carlo simple regret and its standard error over fresh contexts."""
    X = env.sample_contexts(n_contexts, rng)
    reg = simple_regret_on(policy, env, X)
    se = float(reg.std(ddof=1) / np.sqrt(n_contexts)) if n_contexts > 1 else float("nan")
    return float(reg.mean()), se


def cover_on(kernel, env, X: np.ndarray) -> float:
    """``mean_x 1 / p(pi*(x) | x)`` on the given contexts."""
    best = env.optimal_arms(X)
    p = kernel.probs(X)[np.arange(X.shape[0]), best]
    return float(np.mean(1.0 / p))


def estimate_optimal_cover(kernel, env, n_contexts: int, rng: np.random.Generator) -> float:
    return cover_on(kernel, env, env.sample_contexts(n_contexts, rng))


def coverage_on(history, env, X: np.ndarray, zeta: float) -> float:
    """Share of contexts whose optimal arm lies in the conformal arm set ``C(x, zeta)``."""
    from ..cas import cas_mask

    best = env.optimal_arms(X)
    return float(np.mean(cas_mask(history, X, zeta)[np.arange(X.shape[0]), best]))
