"""Conformal arm sets and the proportional-response action kernel.

Every history entry ``mbar`` (1-based) contributes the normalized regret

    s_mbar(x, a) = gap_mbar(x, a) / (2 mbar^2 U_mbar),

where ``gap_mbar`` is the estimated regret of arm ``a`` under the model fitted
for epoch ``mbar``. With ``s = max_mbar s_mbar`` an arm belongs to the
intersection set at risk level ``zeta`` iff ``zeta * s <= 1``, and to the
kernel's set at level ``beta / eta`` iff ``beta <= eta / s``. All set and
probability computations below go through ``s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import InvalidInputError, LinearRewardModel, as_context, as_contexts

DEFAULT_BLOAT = 20.0
BETA_MAX = 0.5


@dataclass(frozen=True)
class EpochHistoryEntry:
    """Frozen per-epoch record: fitted model, previous cover bound and error level."""

    model: LinearRewardModel
    alpha_prev: float
    xi: float
    bloat: float = DEFAULT_BLOAT

    def __post_init__(self):
        if not self.xi > 0:
            raise InvalidInputError("xi must be positive")
        if not self.alpha_prev >= 1:
            raise InvalidInputError("alpha_prev must be >= 1")

    @property
    def u(self) -> float:
        return self.bloat * math.sqrt(self.alpha_prev * self.xi)

    def gaps(self, X: np.ndarray) -> np.ndarray:
        pred = self.model.predict(X)
        return pred.max(axis=1, keepdims=True) - pred


History = Sequence[EpochHistoryEntry]


def _check_history(history: History) -> None:
    if len(history) == 0:
        raise InvalidInputError("history must contain at least one epoch")


def normalized_regret(history: History, X: np.ndarray) -> np.ndarray:
    """``max_mbar gap_mbar(x, a) / (2 mbar^2 U_mbar)``, shape (n, K)."""
    _check_history(history)
    s = None
    for mbar, entry in enumerate(history, start=1):
        term = entry.gaps(X) / (2.0 * mbar**2 * entry.u)
        s = term if s is None else np.maximum(s, term)
    return s


def regret_penalty(history: History, X: np.ndarray, K: int) -> np.ndarray:
    """``sum_mbar gap_mbar(x, a) / (2 mbar^2 U_mbar)``: the under-exploration penalty.

    An empty history gives an all-zero penalty.
    """
    total = np.zeros((X.shape[0], K))
    for mbar, entry in enumerate(history, start=1):
        total = total + entry.gaps(X) / (2.0 * mbar**2 * entry.u)
    return total


def cas_mask(history: History, X, zeta: float, include_greedy: bool = True) -> np.ndarray:
    """Membership mask of the conformal arm sets at risk level ``zeta``, shape (n, K).

    With ``include_greedy=False`` this is the pure intersection set (no union
    with the latest model's greedy arm).
    """
    _check_history(history)
    if not zeta > 0:
        raise InvalidInputError("zeta must be positive")
    X = as_contexts(X, history[0].model.d)
    mask = np.ones((X.shape[0], history[0].model.K), dtype=bool)
    for mbar, entry in enumerate(history, start=1):
        mask &= entry.gaps(X) <= entry.u * 2.0 * mbar**2 / zeta
    if include_greedy:
        g = history[-1].model.greedy_arms(X)
        mask[np.arange(X.shape[0]), g] = True
    return mask


def cas_members(history: History, x, zeta: float) -> np.ndarray:
    """Sorted arm indices of ``C_m(x, zeta)`` for a single context."""
    x = as_context(x, history[0].model.d if len(history) else None)
    return np.flatnonzero(cas_mask(history, x[None, :], zeta)[0])


def breakpoints(history: History, eta: float, X, beta_max: float = BETA_MAX) -> np.ndarray:
    """Largest ``beta`` in [0, beta_max] keeping each arm in ``C(x, beta / eta)``, shape (n, K)."""
    X = as_contexts(X, history[0].model.d if len(history) else None)
    s = normalized_regret(history, X)
    with np.errstate(divide="ignore"):
        b = np.where(s > 0, eta / np.where(s > 0, s, 1.0), np.inf)
    b = np.minimum(b, beta_max)
    g = history[-1].model.greedy_arms(X)
    b[np.arange(X.shape[0]), g] = beta_max
    return b


def membership_beta(history: History, eta: float, x, a: int, beta_max: float = BETA_MAX) -> float:
    x = as_context(x, history[0].model.d if len(history) else None)
    return float(breakpoints(history, eta, x[None, :], beta_max)[0, a])


def probs_from_breakpoints(b: np.ndarray, beta_max: float = BETA_MAX) -> np.ndarray:
    """Exact kernel probabilities from per-arm breakpoints.

    On ``(b_(i-1), b_(i)]`` (ascending order statistics, ``b_(0) = 0``) the set
    consists of the ``K - i + 1`` arms with the largest breakpoints; an arm
    accumulates ``length / size`` over every interval below its breakpoint.
    Arms whose breakpoint equals ``beta_max`` share the remaining
    ``1 - beta_max`` mass.
    """
    n, K = b.shape
    order = np.argsort(b, axis=1, kind="stable")
    bs = np.take_along_axis(b, order, axis=1)
    prev = np.concatenate([np.zeros((n, 1)), bs[:, :-1]], axis=1)
    sizes = K - np.arange(K)
    cum = np.cumsum((bs - prev) / sizes, axis=1)
    p = np.empty_like(b)
    np.put_along_axis(p, order, cum, axis=1)
    top = b >= beta_max
    p += (1.0 - beta_max) * top / top.sum(axis=1, keepdims=True)
    return p


@dataclass(frozen=True)
class ProportionalResponseKernel:
    """Exploration kernel: draw beta ~ U[0, 1], then an arm uniformly from ``C(x, min(beta, beta_max) / eta)``."""

    history: tuple[EpochHistoryEntry, ...]
    eta: float = 1.0
    beta_max: float = BETA_MAX

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(self.history))
        _check_history(self.history)
        if not self.eta >= 1:
            raise InvalidInputError("eta must be >= 1")
        if not 0 < self.beta_max <= 1:
            raise InvalidInputError("beta_max must lie in (0, 1]")

    @property
    def K(self) -> int:
        return self.history[0].model.K

    @property
    def d(self) -> int:
        return self.history[0].model.d

    @property
    def m(self) -> int:
        return len(self.history)

    def breakpoints(self, X) -> np.ndarray:
        return breakpoints(self.history, self.eta, X, self.beta_max)

    def probs(self, X) -> np.ndarray:
        return probs_from_breakpoints(self.breakpoints(X), self.beta_max)

    def prob(self, a: int, x) -> float:
        x = as_context(x, self.d)
        return float(self.probs(x[None, :])[0, a])

    def members(self, x, zeta: float) -> np.ndarray:
        return cas_members(self.history, x, zeta)

    def sample_batch(self, X, rng: np.random.Generator, b: np.ndarray | None = None) -> np.ndarray:
        """One draw per row of ``X`` via the beta-then-uniform procedure."""
        if b is None:
            b = self.breakpoints(X)
        n, K = b.shape
        beta = np.minimum(rng.random(n), self.beta_max)
        # arms with breakpoint >= beta come first in descending order
        order = np.argsort(-b, axis=1, kind="stable")
        size = (b >= beta[:, None]).sum(axis=1)
        pick = np.minimum((rng.random(n) * size).astype(np.int64), size - 1)
        return order[np.arange(n), pick]

    def sample(self, x, rng: np.random.Generator) -> int:
        x = as_context(x, self.d)
        return int(self.sample_batch(x[None, :], rng)[0])

    def sample_many(self, x, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` independent draws at a single context."""
        x = as_context(x, self.d)
        b = self.breakpoints(x[None, :])[0]
        # same draws as sample_batch on repeated rows, with one sort instead of ``size``
        order = np.argsort(-b, kind="stable")
        asc = np.sort(b)
        beta = np.minimum(rng.random(size), self.beta_max)
        n_in = b.shape[0] - np.searchsorted(asc, beta, side="left")
        pick = np.minimum((rng.random(size) * n_in).astype(np.int64), n_in - 1)
        return order[pick]


def kernel_prob(kernel: ProportionalResponseKernel, x, a: int) -> float:
    return kernel.prob(a, x)


def kernel_sample(kernel: ProportionalResponseKernel, x, rng: np.random.Generator) -> int:
    return kernel.sample(x, rng)


def cbar_eta_thresholds(history: History, X, beta_max: float = BETA_MAX) -> np.ndarray:
    """Smallest ``eta`` at which each arm enters the intersection set at level ``beta_max / eta``."""
    X = as_contexts(X, history[0].model.d if len(history) else None)
    return beta_max * normalized_regret(history, X)


def mean_cbar_size(history: History, eta: float, contexts, beta_max: float = BETA_MAX) -> float:
    """Average size of the intersection set at level ``beta_max / eta`` over ``contexts``."""
    X = as_contexts(contexts, history[0].model.d if len(history) else None)
    if X.shape[0] == 0:
        raise InvalidInputError("need at least one context")
    mask = cas_mask(history, X, beta_max / eta, include_greedy=False)
    return float(mask.sum(axis=1).mean())
