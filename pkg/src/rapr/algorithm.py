"""The omega-RAPR driver: doubling epochs, risk adjustment, misspecification test, policy learning."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .cas import (
    BETA_MAX,
    DEFAULT_BLOAT,
    EpochHistoryEntry,
    ProportionalResponseKernel,
    cbar_eta_thresholds,
    mean_cbar_size,
    probs_from_breakpoints,
    regret_penalty,
)
from .core import (
    ArmAssignment,
    EpochDataset,
    GreedyPolicy,
    InvalidInputError,
    LinearRewardModel,
    LoggedData,
    RunTrace,
)
from .oracles import (
    CscProblem,
    PolicyClass,
    XiRateConfig,
    csc_argmax,
    fit_reward_model,
    ips_table,
    xi_for_epoch,
)


class InvariantViolation(AssertionError):
    """An algorithm invariant failed during a run."""


@dataclass(frozen=True)
class RaprConfig:
    omega: float = 1.0
    delta: float = 0.05
    beta_max: float = BETA_MAX
    bloat: float = DEFAULT_BLOAT
    xi_mode: Literal["theory", "simulation"] = "theory"
    xi_scale: float = 0.25
    ridge_lambda: float = 1e-6
    realizability_shortcut: bool = False
    csc_class: PolicyClass = "induced-greedy"
    # "final-epoch": learn from the last (possibly partial) epoch; "all": every logged round
    final_eval: Literal["final-epoch", "all"] = "final-epoch"
    check_invariants: bool = True

    @classmethod
    def simulation(cls, omega: float = 1.0, **overrides) -> "RaprConfig":
        """Preset used for the synthetic benchmark: sqrt(xi(T)) = 0.25 sqrt(d/T), bloat 1."""
        base = dict(omega=omega, xi_mode="simulation", xi_scale=0.25, bloat=1.0)
        base.update(overrides)
        return cls(**base)

    def validate(self, K: int) -> None:
        if not 1 <= self.omega <= K:
            raise InvalidInputError(f"omega={self.omega} outside [1, {K}]")
        if not 0 < self.delta < 1:
            raise InvalidInputError("delta must lie in (0, 1)")
        if not 0 < self.beta_max <= 1:
            raise InvalidInputError("beta_max must lie in (0, 1]")
        if self.bloat <= 0:
            raise InvalidInputError("bloat must be positive")

    def xi_config(self, d: int, K: int) -> XiRateConfig:
        return XiRateConfig(d=d, K=K, scale_c=self.xi_scale, mode=self.xi_mode)


@dataclass(frozen=True)
class MisspecResult:
    passed: bool
    L1: float
    L2: float
    L3: float
    rhs: float


@dataclass
class RaprState:
    """Mutable run state. Per-epoch lists are indexed by ``epoch - 1``."""

    K: int
    d: int
    m: int = 1
    tau: list[int] = field(default_factory=lambda: [0, 3])
    etas: list[float] = field(default_factory=list)
    alphas: list[float] = field(default_factory=list)
    xis: list[float] = field(default_factory=list)
    history: list[EpochHistoryEntry] = field(default_factory=list)
    kernels: list[ProportionalResponseKernel] = field(default_factory=list)
    safe: bool = True
    m_hat: int | None = None
    tests: list[MisspecResult | None] = field(default_factory=list)
    eval_data: LoggedData | None = None

    @classmethod
    def initial(cls, K: int, d: int, cfg: RaprConfig) -> "RaprState":
        # f_1 = 0 makes every gap zero, so xi_1 only has to be positive; 1 is its cap
        entry = EpochHistoryEntry(LinearRewardModel.zeros(K, d), alpha_prev=3.0 * K, xi=1.0, bloat=cfg.bloat)
        state = cls(K=K, d=d)
        state.etas.append(1.0)
        state.alphas.append(3.0 * K)
        state.xis.append(1.0)
        state.history.append(entry)
        state.kernels.append(ProportionalResponseKernel((entry,), eta=1.0, beta_max=cfg.beta_max))
        return state

    def eta(self, m: int) -> float:
        return self.etas[max(m, 1) - 1]

    def alpha(self, m: int) -> float:
        # alpha_0 := alpha_1 = 3K
        return self.alphas[max(m, 1) - 1]

    def xi(self, m: int) -> float:
        return self.xis[m - 1]

    @property
    def active_kernel(self) -> ProportionalResponseKernel:
        return self.kernels[(self.m_hat if not self.safe else self.m) - 1]

    @property
    def epoch_length(self) -> int:
        return self.tau[self.m] - self.tau[self.m - 1]


def lambda_bound(mean_size: float, K: int, n2: int, m: int, delta: float) -> float:
    """High-probability upper bound on the expected conformal set size."""
    dev = math.sqrt(K**2 * math.log(8.0 * n2 * (m + 1) ** 2 / delta) / (2.0 * n2))
    return min(1.0 + mean_size + dev, float(K))


def _eta_grid(n2: int) -> np.ndarray:
    return n2 / np.arange(n2, 0, -1, dtype=float)


def choose_eta(
    eta_m: float,
    alpha_m: float,
    omega: float,
    K: int,
    delta: float,
    m: int,
    history_next,
    split2_contexts,
    beta_max: float = BETA_MAX,
) -> float:
    """Largest feasible risk adjustment on the grid ``n2 / n``, never below ``eta_m``.

    Feasibility (``eta <= sqrt(omega K / alpha_m)`` and ``lambda(eta) <= K / eta``)
    is closed downward along the grid, so binary search applies.
    """
    X = np.asarray(split2_contexts, dtype=float)
    n2 = X.shape[0]
    if n2 == 0:
        raise InvalidInputError("risk adjustment needs a non-empty second split")
    thresholds = np.sort(cbar_eta_thresholds(history_next, X, beta_max).ravel())
    grid = _eta_grid(n2)
    cap = math.sqrt(omega * K / alpha_m)

    def feasible(i: int) -> bool:
        eta = grid[i]
        if eta > cap:
            return False
        size = np.searchsorted(thresholds, eta, side="right") / n2
        return lambda_bound(size, K, n2, m, delta) <= K / eta

    lo, hi = -1, n2 - 1  # invariant: grid[:lo+1] feasible, grid[hi+1:] infeasible
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid - 1
    return eta_m if lo < 0 else max(eta_m, float(grid[lo]))


def choose_eta_scan(
    eta_m, alpha_m, omega, K, delta, m, history_next, split2_contexts, beta_max: float = BETA_MAX
) -> float:
    """Exhaustive reference for :func:`choose_eta`, evaluating set sizes directly."""
    X = np.asarray(split2_contexts, dtype=float)
    n2 = X.shape[0]
    best = None
    cap = math.sqrt(omega * K / alpha_m)
    for eta in _eta_grid(n2):
        if eta > cap:
            continue
        lam = lambda_bound(mean_cbar_size(history_next, eta, X, beta_max), K, n2, m, delta)
        if lam <= K / eta:
            best = eta if best is None else max(best, eta)
    return eta_m if best is None else max(eta_m, float(best))


def _policy_mean(scores: np.ndarray, arms: np.ndarray) -> float:
    return float(scores[np.arange(scores.shape[0]), arms].mean())


def misspec_test(
    history,
    alpha_m: float,
    xi_next: float,
    split3: LoggedData,
    next_kernel: ProportionalResponseKernel,
    f_next: LinearRewardModel,
    policy_class: PolicyClass = "induced-greedy",
    ridge_lambda: float = 1e-6,
) -> MisspecResult:
    """Compare model-based and IPS values over the policy class and the next kernel.

    ``history`` holds the entries of epochs 1..m (not the new model). Two CSC
    calls give L1 and L2; L3 is the discrepancy at ``next_kernel`` itself.
    """
    if len(split3) == 0:
        raise InvalidInputError("misspecification test needs a non-empty third split")
    K = f_next.K
    X = split3.contexts
    w = math.sqrt(alpha_m * xi_next)
    pen = w * regret_penalty(history, X, K)
    ips = ips_table(split3, K)
    F = f_next.predict(X)

    stats = []
    for scores in (F - ips - pen, ips - F - pen):
        policy = csc_argmax(CscProblem(X, scores), policy_class, ridge_lambda)
        stats.append(_policy_mean(scores, policy.actions(X)))

    q = next_kernel.probs(X)
    n = len(split3)
    model_v = float(np.mean(np.sum(q * F, axis=1)))
    ips_v = float(np.mean(q[np.arange(n), split3.arms] * split3.rewards / split3.propensities))
    pen_v = float(np.mean(np.sum(q * pen, axis=1)))
    L3 = abs(model_v - ips_v) - pen_v

    rhs = 2.05 * w + 1.1 * math.sqrt(xi_next)
    L1, L2 = stats
    return MisspecResult(bool(max(L1, L2, L3) <= rhs), L1, L2, L3, rhs)


def end_epoch(state: RaprState, cfg: RaprConfig, data: LoggedData) -> RaprState:
    """Close the current epoch with its logged data and prepare the next one."""
    m, K = state.m, state.K
    xi_next = xi_for_epoch(m, state.tau, cfg.delta, cfg.xi_config(state.d, K))
    test = None
    if state.safe:
        ds = EpochDataset.from_data(data)
        f_next = fit_reward_model(ds.part(1), K, cfg.ridge_lambda)
        alpha_m = state.alpha(m)
        entry = EpochHistoryEntry(f_next, alpha_prev=alpha_m, xi=xi_next, bloat=cfg.bloat)
        hist_next = state.history[:m] + [entry]
        eta_next = choose_eta(
            state.eta(m), alpha_m, cfg.omega, K, cfg.delta, m, hist_next, ds.part(2).contexts, cfg.beta_max
        )
        kernel_next = ProportionalResponseKernel(tuple(hist_next), eta=eta_next, beta_max=cfg.beta_max)
        split3 = ds.part(3)
        test = misspec_test(
            state.history[:m], alpha_m, xi_next, split3, kernel_next, f_next, cfg.csc_class, cfg.ridge_lambda
        )
        state.history.append(entry)
        state.eval_data = split3
        if test.passed:
            state.kernels.append(kernel_next)
            state.etas.append(eta_next)
            state.alphas.append(3.0 * K / eta_next)
        else:
            state.safe = False
            state.m_hat = m
            state.etas.append(state.eta(m))
            state.alphas.append(state.alpha(m))
    else:
        state.eval_data = data
        state.etas.append(state.eta(m))
        state.alphas.append(state.alpha(m))
    state.xis.append(xi_next)
    state.tests.append(test)
    state.m += 1
    state.tau.append(2 * state.tau[-1])
    if cfg.check_invariants:
        check_state_invariants(state)
    return state


def advance_epoch(
    state: RaprState, cfg: RaprConfig, collect: Callable[[ProportionalResponseKernel, int], LoggedData]
) -> RaprState:
    """Collect one full epoch through ``collect(kernel, n_rounds)`` and close it."""
    data = collect(state.active_kernel, state.epoch_length)
    return end_epoch(state, cfg, data)


def learn_final_policy(state: RaprState, cfg: RaprConfig, data: LoggedData) -> GreedyPolicy | ArmAssignment:
    """Variance-penalized policy learning from ``data`` at termination.

    ``state.m`` is the epoch in which the horizon ends.
    """
    if state.m < 1 or len(state.history) == 0:
        raise InvalidInputError("no completed epoch")
    if cfg.realizability_shortcut:
        return GreedyPolicy(state.history[-1].model)
    if len(data) == 0:
        raise InvalidInputError("policy learning needs logged data")
    M = state.m
    m_prime = min(state.m_hat if state.m_hat is not None else M, M) - 1
    X = data.contexts
    scores = ips_table(data, state.K)
    if m_prime >= 1:
        w = 0.5 * math.sqrt(state.alpha(m_prime) * state.xi(M))
        scores = scores - w * regret_penalty(state.history[:m_prime], X, state.K)
    return csc_argmax(CscProblem(X, scores), cfg.csc_class, cfg.ridge_lambda)


def check_state_invariants(state: RaprState) -> None:
    K = state.K
    etas = np.asarray(state.etas)
    alphas = np.asarray(state.alphas)
    if not np.allclose(alphas, 3.0 * K / etas, rtol=1e-12, atol=0):
        raise InvariantViolation("alpha_m != 3K / eta_m")
    if np.any(np.diff(etas) < 0):
        raise InvariantViolation("eta decreased")
    if np.any(np.diff(alphas) > 0):
        raise InvariantViolation("alpha increased")
    if np.any(alphas < 1 - 1e-12) or np.any(alphas > 3 * K + 1e-12):
        raise InvariantViolation("alpha outside [1, 3K]")
    if state.m_hat is not None and state.safe:
        raise InvariantViolation("safe flag restored after a failed test")


def _check_round_invariants(P: np.ndarray, props: np.ndarray) -> None:
    if np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
        raise InvariantViolation("kernel probabilities do not sum to one")
    if np.any(props <= 0):
        raise InvariantViolation("non-positive propensity")


@dataclass
class RaprResult:
    trace: RunTrace
    policy: GreedyPolicy | ArmAssignment
    state: RaprState
    # kernel used in each epoch, epoch-indexed from 1
    epoch_kernels: list[ProportionalResponseKernel] = field(default_factory=list)


def rapr_run(env, T: int, cfg: RaprConfig, seed: int) -> RaprResult:
    """Run omega-RAPR for ``T`` rounds on ``env``.

    Random streams: contexts, rewards and arm draws are independent children
    of ``SeedSequence(seed)``, so runs with equal seeds see identical contexts
    and reward noise regardless of the algorithm.
    """
    if T < 1:
        raise InvalidInputError("T must be >= 1")
    K, d = env.K, env.d
    cfg.validate(K)
    ctx_rng, rew_rng, alg_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    X_all = env.sample_contexts(T, ctx_rng)

    state = RaprState.initial(K, d, cfg)
    arms = np.empty(T, dtype=np.int64)
    rewards = np.empty(T)
    props = np.empty(T)
    probs = np.empty((T, K))
    epoch_col = np.empty(T, dtype=np.int64)
    safe_col = np.empty(T, dtype=bool)
    records: list[dict] = []
    kernels_used: list[ProportionalResponseKernel] = []

    t = 0
    while t < T:
        m = state.m
        end = min(state.tau[m], T)
        kernel = state.active_kernel
        kernels_used.append(kernel)
        X = X_all[t:end]
        b = kernel.breakpoints(X)
        P = probs_from_breakpoints(b, kernel.beta_max)
        a = kernel.sample_batch(X, alg_rng, b=b)
        p = P[np.arange(end - t), a]
        if cfg.check_invariants:
            _check_round_invariants(P, p)
        r = env.sample_rewards(X, a, rew_rng)
        arms[t:end], rewards[t:end], props[t:end], probs[t:end] = a, r, p, P
        epoch_col[t:end], safe_col[t:end] = m, state.safe
        record = dict(m=m, tau_m=state.tau[m], eta=state.eta(m), alpha=state.alpha(m), xi=state.xi(m), safe=state.safe)
        data = LoggedData(X, a, r, p)
        if end == state.tau[m] and end < T:
            end_epoch(state, cfg, data)
            test = state.tests[-1]
        else:
            test = None
            final_data = data
        record.update(
            L1=test.L1 if test else math.nan,
            L2=test.L2 if test else math.nan,
            L3=test.L3 if test else math.nan,
            rhs=test.rhs if test else math.nan,
        )
        records.append(record)
        t = end

    trace = RunTrace(X_all, arms, rewards, props, epoch_col, safe_col, probs, records)
    learn_data = trace.logged() if cfg.final_eval == "all" else final_data
    state.eval_data = final_data
    policy = learn_final_policy(state, cfg, learn_data)
    return RaprResult(trace, policy, state, kernels_used)
