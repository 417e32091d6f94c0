"""Shared domain types: contexts, logged data, affine reward models, policies."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np


class InvalidInputError(ValueError):
    """Raised when an operation receives arguments outside its domain."""


def as_context(x, d: int | None = None) -> np.ndarray:
    """Validate a single context and return it as a 1-D float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"context must be 1-D, got shape {arr.shape}")
    if d is not None and arr.shape[0] != d:
        raise InvalidInputError(f"context has length {arr.shape[0]}, expected {d}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("context entries must be finite")
    return arr


def as_contexts(X, d: int | None = None) -> np.ndarray:
    """Validate a batch of contexts, shape (n, d)."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise InvalidInputError(f"contexts must be 2-D, got shape {arr.shape}")
    if d is not None and arr.shape[1] != d:
        raise InvalidInputError(f"contexts have dimension {arr.shape[1]}, expected {d}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("context entries must be finite")
    return arr


@dataclass(frozen=True)
class LoggedSample:
    context: np.ndarray
    arm: int
    reward: float
    propensity: float


@dataclass(frozen=True)
class LoggedData:
    """Column-oriented batch of logged (context, arm, reward, propensity) tuples.

    This is the array form of a sequence of :class:`LoggedSample`; every
    estimator in the package consumes it directly.
    """

    contexts: np.ndarray
    arms: np.ndarray
    rewards: np.ndarray
    propensities: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.contexts, dtype=float)
        if X.ndim != 2:
            raise InvalidInputError("contexts must be 2-D")
        n = X.shape[0]
        arms = np.asarray(self.arms, dtype=np.int64).reshape(n)
        rewards = np.asarray(self.rewards, dtype=float).reshape(n)
        props = np.asarray(self.propensities, dtype=float).reshape(n)
        object.__setattr__(self, "contexts", X)
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "propensities", props)

    def __len__(self) -> int:
        return self.contexts.shape[0]

    @property
    def d(self) -> int:
        return self.contexts.shape[1]

    def subset(self, idx) -> "LoggedData":
        idx = np.asarray(idx)
        return LoggedData(self.contexts[idx], self.arms[idx], self.rewards[idx], self.propensities[idx])

    @classmethod
    def empty(cls, d: int) -> "LoggedData":
        return cls(np.zeros((0, d)), np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0))

    @classmethod
    def from_samples(cls, samples: Sequence[LoggedSample], d: int | None = None) -> "LoggedData":
        if len(samples) == 0:
            if d is None:
                raise InvalidInputError("cannot infer dimension of an empty sample list")
            return cls.empty(d)
        X = np.stack([as_context(s.context, d) for s in samples])
        return cls(
            X,
            np.array([s.arm for s in samples]),
            np.array([s.reward for s in samples]),
            np.array([s.propensity for s in samples]),
        )

    @classmethod
    def concat(cls, parts: Iterable["LoggedData"]) -> "LoggedData":
        parts = list(parts)
        return cls(
            np.concatenate([p.contexts for p in parts]),
            np.concatenate([p.arms for p in parts]),
            np.concatenate([p.rewards for p in parts]),
            np.concatenate([p.propensities for p in parts]),
        )

    def samples(self) -> list[LoggedSample]:
        return [
            LoggedSample(self.contexts[i], int(self.arms[i]), float(self.rewards[i]), float(self.propensities[i]))
            for i in range(len(self))
        ]


def split_three(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Round-robin split of ``range(n)`` into three disjoint index sets."""
    idx = np.arange(n)
    return idx[0::3], idx[1::3], idx[2::3]


@dataclass(frozen=True)
class EpochDataset:
    data: LoggedData
    split_1: np.ndarray
    split_2: np.ndarray
    split_3: np.ndarray

    @classmethod
    def from_data(cls, data: LoggedData) -> "EpochDataset":
        return cls(data, *split_three(len(data)))

    def part(self, k: int) -> LoggedData:
        return self.data.subset((self.split_1, self.split_2, self.split_3)[k - 1])


@dataclass(frozen=True)
class LinearRewardModel:
    """Per-arm affine predictor ``clamp(intercepts[a] + weights[a] @ x)``.

    ``clip_lo``/``clip_hi`` default to the reward range [0, 1]; score
    regressions used by the CSC reduction pass infinite bounds.
    """

    weights: np.ndarray
    intercepts: np.ndarray
    clip_lo: float = 0.0
    clip_hi: float = 1.0

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.intercepts, dtype=float)
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise InvalidInputError(f"weights {W.shape} and intercepts {b.shape} are inconsistent")
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "intercepts", b)

    @classmethod
    def zeros(cls, K: int, d: int) -> "LinearRewardModel":
        return cls(np.zeros((K, d)), np.zeros(K))

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]

    def predict(self, X) -> np.ndarray:
        """Predictions for every arm, shape (n, K)."""
        X = as_contexts(X, self.d)
        raw = X @ self.weights.T + self.intercepts
        return np.clip(raw, self.clip_lo, self.clip_hi)

    def greedy_arms(self, X) -> np.ndarray:
        # np.argmax returns the first maximizer, i.e. the lowest arm index
        return np.argmax(self.predict(X), axis=1)


def model_predict(model: LinearRewardModel, x, a: int) -> float:
    x = as_context(x, model.d)
    if not 0 <= a < model.K:
        raise InvalidInputError(f"arm {a} outside [0, {model.K})")
    return float(model.predict(x[None, :])[0, a])


def greedy_arm(model: LinearRewardModel, x) -> int:
    x = as_context(x, model.d)
    return int(model.greedy_arms(x[None, :])[0])


@runtime_checkable
class ActionKernel(Protocol):
    """Anything that maps contexts to per-arm probabilities (rows sum to one)."""

    K: int

    def probs(self, X) -> np.ndarray: ...


def one_hot(arms: np.ndarray, K: int) -> np.ndarray:
    out = np.zeros((arms.shape[0], K))
    out[np.arange(arms.shape[0]), arms] = 1.0
    return out


@dataclass(frozen=True)
class GreedyPolicy:
    model: LinearRewardModel

    @property
    def K(self) -> int:
        return self.model.K

    def action(self, x) -> int:
        return greedy_arm(self.model, x)

    def actions(self, X) -> np.ndarray:
        return self.model.greedy_arms(X)

    def probs(self, X) -> np.ndarray:
        return one_hot(self.actions(X), self.K)


@dataclass(frozen=True)
class ArmAssignment:
    """Per-row arm choice over a fixed set of contexts (the unrestricted policy class).

    Only defined on the contexts it was fitted on; ``probs`` checks the row count.
    """

    arms: np.ndarray
    K: int

    def actions(self, X) -> np.ndarray:
        X = np.asarray(X)
        if X.shape[0] != self.arms.shape[0]:
            raise InvalidInputError("ArmAssignment is only defined on its own contexts")
        return self.arms

    def probs(self, X) -> np.ndarray:
        return one_hot(self.actions(X), self.K)


@dataclass(frozen=True)
class UniformKernel:
    K: int

    def probs(self, X) -> np.ndarray:
        n = np.atleast_2d(X).shape[0]
        return np.full((n, self.K), 1.0 / self.K)

    def prob(self, a: int, x) -> float:
        return 1.0 / self.K

    def sample(self, x, rng: np.random.Generator) -> int:
        return int(rng.integers(self.K))

    def sample_batch(self, X, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(self.K, size=np.asarray(X).shape[0])


@dataclass
class RunTrace:
    """Per-round and per-epoch log of one run.

    ``probs`` holds the full logging distribution of every round, which the
    metrics use for exact expectations; for deterministic baselines it is the
    one-hot vector of the chosen arm.
    """

    contexts: np.ndarray
    arms: np.ndarray
    rewards: np.ndarray
    propensities: np.ndarray
    epochs: np.ndarray
    safe: np.ndarray
    probs: np.ndarray
    epoch_records: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return self.arms.shape[0]

    def logged(self) -> LoggedData:
        return LoggedData(self.contexts, self.arms, self.rewards, self.propensities)
