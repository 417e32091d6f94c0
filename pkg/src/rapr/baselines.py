"""Comparison algorithms: uniform RCT, disjoint LinUCB and linear Thompson sampling."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import GreedyPolicy, InvalidInputError, LinearRewardModel, LoggedData, RunTrace, one_hot
from .oracles import CscProblem, csc_argmax, ips_table


def uniform_step(K: int, rng: np.random.Generator) -> int:
    return int(rng.integers(K))


@dataclass
class LinUcbState:
    """Per-arm ridge statistics on augmented contexts ``(x, 1)``.

    ``A`` starts at the identity; its inverse is maintained with
    Sherman-Morrison updates.
    """

    K: int
    d: int
    ucb_scale: float = 0.25
    A: np.ndarray = field(init=False)
    A_inv: np.ndarray = field(init=False)
    b: np.ndarray = field(init=False)

    def __post_init__(self):
        p = self.d + 1
        self.A = np.tile(np.eye(p), (self.K, 1, 1))
        self.A_inv = self.A.copy()
        self.b = np.zeros((self.K, p))

    def theta(self) -> np.ndarray:
        return np.einsum("kij,kj->ki", self.A_inv, self.b)

    def mean_and_width(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xt = np.append(x, 1.0)
        mean = self.theta() @ xt
        var = np.einsum("i,kij,j->k", xt, self.A_inv, xt)
        return mean, np.sqrt(np.maximum(var, 0.0))

    def update(self, x: np.ndarray, arm: int, reward: float) -> None:
        xt = np.append(x, 1.0)
        self.A[arm] += np.outer(xt, xt)
        Ax = self.A_inv[arm] @ xt
        self.A_inv[arm] -= np.outer(Ax, Ax) / (1.0 + xt @ Ax)
        self.b[arm] += reward * xt

    def greedy_policy(self) -> GreedyPolicy:
        th = self.theta()
        return GreedyPolicy(LinearRewardModel(th[:, :-1], th[:, -1], -np.inf, np.inf))


def linucb_step(state: LinUcbState, x: np.ndarray) -> int:
    mean, width = state.mean_and_width(np.asarray(x, dtype=float))
    return int(np.argmax(mean + state.ucb_scale * width))


def lints_step(state: LinUcbState, x: np.ndarray, rng: np.random.Generator) -> int:
    """Thompson draw ``theta_a ~ N(theta_hat_a, scale^2 A_a^{-1})`` for every arm.

    Only the scalar ``<theta_a, (x, 1)>`` matters for the argmax and it is
    Gaussian with mean ``<theta_hat_a, x>`` and std ``scale * width_a``, so that
    scalar is sampled directly.
    """
    mean, width = state.mean_and_width(np.asarray(x, dtype=float))
    return int(np.argmax(mean + state.ucb_scale * width * rng.standard_normal(state.K)))


@dataclass
class BaselineResult:
    trace: RunTrace
    policy: GreedyPolicy


def run_baseline(env, T: int, algo: str, seed: int, ucb_scale: float = 0.25, ridge_lambda: float = 1e-6) -> BaselineResult:
    """Run ``uniform``, ``linucb`` or ``lints`` for ``T`` rounds.

    Uses the same stream layout as :func:`rapr.algorithm.rapr_run`, so equal
    seeds share contexts and reward noise. The learned policy is greedy on the
    final ridge estimates for LinUCB/LinTS and IPS policy learning over the
    full log for the uniform design.
    """
    if T < 1:
        raise InvalidInputError("T must be >= 1")
    if algo not in ("uniform", "linucb", "lints"):
        raise InvalidInputError(f"unknown baseline {algo!r}")
    K, d = env.K, env.d
    ctx_rng, rew_rng, alg_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    X = env.sample_contexts(T, ctx_rng)

    if algo == "uniform":
        arms = alg_rng.integers(K, size=T)
        rewards = env.sample_rewards(X, arms, rew_rng)
        probs = np.full((T, K), 1.0 / K)
        props = np.full(T, 1.0 / K)
        data = LoggedData(X, arms, rewards, props)
        policy = csc_argmax(CscProblem(X, ips_table(data, K)), "induced-greedy", ridge_lambda)
    else:
        state = LinUcbState(K, d, ucb_scale)
        arms = np.empty(T, dtype=np.int64)
        rewards = np.empty(T)
        for t in range(T):
            x = X[t]
            a = linucb_step(state, x) if algo == "linucb" else lints_step(state, x, alg_rng)
            r = env.sample_rewards(x[None, :], [a], rew_rng)[0]
            state.update(x, a, r)
            arms[t], rewards[t] = a, r
        probs = one_hot(arms, K)
        props = np.ones(T)
        policy = state.greedy_policy()

    trace = RunTrace(X, arms, rewards, props, np.ones(T, dtype=np.int64), np.ones(T, dtype=bool), probs, [])
    return BaselineResult(trace, policy)
