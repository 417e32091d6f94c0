"""Estimation and evaluation oracles: ridge least squares, the xi rate, IPS, CSC.

The estimators here are deterministic functions of their inputs; confidence
levels only enter through :func:`xi_for_epoch`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .core import (
    ArmAssignment,
    GreedyPolicy,
    InvalidInputError,
    LinearRewardModel,
    LoggedData,
    as_contexts,
)

XiMode = Literal["theory", "simulation"]
PolicyClass = Literal["induced-greedy", "universal"]


@dataclass(frozen=True)
class XiRateConfig:
    """Squared-error rate ``xi(n, delta')`` of the regression oracle.

    ``theory``:     c^2 d ln(max(n, 2) K / delta') / n
    ``simulation``: c^2 d / n, so that sqrt(xi(T, .)) = c sqrt(d / T)
    """

    d: int
    K: int
    scale_c: float = 0.25
    mode: XiMode = "theory"

    def __post_init__(self):
        if self.scale_c <= 0:
            raise InvalidInputError("scale_c must be positive")
        if self.mode not in ("theory", "simulation"):
            raise InvalidInputError(f"unknown xi mode {self.mode!r}")

    def rate(self, n: float, delta: float) -> float:
        if n <= 0:
            raise InvalidInputError("xi is defined for n > 0")
        base = self.scale_c**2 * self.d / n
        if self.mode == "simulation":
            return base
        return base * math.log(max(n, 2.0) * self.K / delta)


def epoch_schedule(M: int) -> list[int]:
    """Epoch end points ``[tau_0, ..., tau_M]`` with tau_0 = 0, tau_1 = 3, doubling after."""
    tau = [0, 3]
    while len(tau) <= M:
        tau.append(2 * tau[-1])
    return tau[: M + 1]


def xi_for_epoch(m: int, tau: Sequence[int], delta: float, cfg: XiRateConfig) -> float:
    """Error level ``xi_{m+1}`` attached to the model fitted at the end of epoch ``m``.

    Equals ``2 xi((tau_m - tau_{m-1}) / 3, delta / (16 m^3))``, capped at 1.
    """
    if m < 1:
        raise InvalidInputError("epoch index must be >= 1")
    if len(tau) <= m:
        raise InvalidInputError(f"schedule has no entry for epoch {m}")
    n = (tau[m] - tau[m - 1]) / 3.0
    return min(1.0, 2.0 * cfg.rate(n, delta / (16.0 * m**3)))


def _ridge_affine(X: np.ndarray, Y: np.ndarray, ridge_lambda: float) -> tuple[np.ndarray, np.ndarray]:
    """Ridge fit of every column of ``Y`` on ``[X, 1]`` with an unpenalized intercept.

    Centering removes the intercept from the normal system; when that system is
    singular (only possible for ``ridge_lambda == 0``) the minimum-norm
    least-squares solution is returned.
    """
    x_mean = X.mean(axis=0)
    y_mean = Y.mean(axis=0)
    Xc = X - x_mean
    Yc = Y - y_mean
    G = Xc.T @ Xc + ridge_lambda * np.eye(X.shape[1])
    rhs = Xc.T @ Yc
    try:
        if ridge_lambda == 0:
            raise np.linalg.LinAlgError
        W = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        W = np.linalg.lstsq(Xc, Yc, rcond=None)[0]
    b = y_mean - x_mean @ W
    return W, b


def fit_reward_model(data: LoggedData, K: int, ridge_lambda: float = 1e-6) -> LinearRewardModel:
    """Per-arm ridge regression of rewards on contexts.

    Arms without samples get the zero predictor, so an empty dataset yields
    the all-zero model.
    """
    if ridge_lambda < 0:
        raise InvalidInputError("ridge_lambda must be non-negative")
    d = data.d
    W = np.zeros((K, d))
    b = np.zeros(K)
    for a in range(K):
        mask = data.arms == a
        if not mask.any():
            continue
        Wa, ba = _ridge_affine(data.contexts[mask], data.rewards[mask][:, None], ridge_lambda)
        W[a] = Wa[:, 0]
        b[a] = ba[0]
    return LinearRewardModel(W, b)


def _check_logged(data: LoggedData) -> None:
    if len(data) == 0:
        raise InvalidInputError("estimator needs at least one sample")
    if np.any(data.propensities <= 0):
        raise InvalidInputError("propensities must be strictly positive")


def ips_table(data: LoggedData, K: int) -> np.ndarray:
    """Per-sample, per-arm IPS terms ``I[a = a_t] r_t / p_t``, shape (n, K)."""
    _check_logged(data)
    out = np.zeros((len(data), K))
    out[np.arange(len(data)), data.arms] = data.rewards / data.propensities
    return out


def ips_value(data: LoggedData, target) -> float:
    """Inverse-propensity estimate of the value of ``target`` (policy or kernel)."""
    _check_logged(data)
    q = target.probs(data.contexts)
    weights = q[np.arange(len(data)), data.arms] / data.propensities
    return float(np.mean(weights * data.rewards))


def model_value(data: LoggedData, f: LinearRewardModel, target) -> float:
    """Model-based estimate ``mean_t sum_a target(a|x_t) f(x_t, a)``."""
    if len(data) == 0:
        raise InvalidInputError("estimator needs at least one sample")
    q = target.probs(data.contexts)
    return float(np.mean(np.sum(q * f.predict(data.contexts), axis=1)))


@dataclass(frozen=True)
class CscProblem:
    """Cost-sensitive classification: pick one arm per context to maximize total score."""

    contexts: np.ndarray
    scores: np.ndarray
    maximize: bool = True

    def __post_init__(self):
        X = as_contexts(self.contexts)
        S = np.asarray(self.scores, dtype=float)
        if S.ndim != 2 or S.shape[0] != X.shape[0]:
            raise InvalidInputError(f"score table {S.shape} does not match {X.shape[0]} contexts")
        if not np.all(np.isfinite(S)):
            raise InvalidInputError("scores must be finite")
        object.__setattr__(self, "contexts", X)
        object.__setattr__(self, "scores", S)

    @property
    def K(self) -> int:
        return self.scores.shape[1]

    def utility(self) -> np.ndarray:
        return self.scores if self.maximize else -self.scores

    def total(self, arms: np.ndarray) -> float:
        return float(self.scores[np.arange(self.scores.shape[0]), arms].sum())


def csc_argmax(
    problem: CscProblem,
    policy_class: PolicyClass = "induced-greedy",
    ridge_lambda: float = 1e-6,
) -> GreedyPolicy | ArmAssignment:
    """Solve (exactly or approximately) a cost-sensitive classification problem.

    ``universal`` takes the row-wise argmax, which is exact over all per-context
    assignments. ``induced-greedy`` regresses every score column on the
    contexts and returns the greedy policy of that unclipped affine model; it
    is a regression reduction and only approximately optimal over greedy
    linear policies.
    """
    if problem.scores.shape[0] == 0:
        raise InvalidInputError("empty CSC problem")
    U = problem.utility()
    if policy_class == "universal":
        return ArmAssignment(np.argmax(U, axis=1), problem.K)
    if policy_class != "induced-greedy":
        raise InvalidInputError(f"unknown policy class {policy_class!r}")
    if np.all(U == U[:, :1]):
        # rows tied across arms would otherwise hinge on rounding noise in the fit
        W = np.zeros((problem.K, problem.contexts.shape[1]))
        return GreedyPolicy(LinearRewardModel(W, np.zeros(problem.K), -np.inf, np.inf))
    W, b = _ridge_affine(problem.contexts, U, ridge_lambda)
    return GreedyPolicy(LinearRewardModel(W.T, b, -np.inf, np.inf))
