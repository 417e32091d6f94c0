"""Synthetic environments exposing the true mean reward for regret computation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .core import InvalidInputError, LinearRewardModel, as_context, as_contexts
from .oracles import _ridge_affine

NoiseKind = Literal["uniform", "bernoulli"]


class Environment:
    """Stochastic contextual bandit with known conditional mean rewards.

    Subclasses implement ``sample_contexts`` and ``mean_rewards``; rewards are
    the mean plus noise drawn by ``noise`` (``uniform``: additive
    U[-noise_halfwidth, noise_halfwidth]; ``bernoulli``: r ~ Bernoulli(mean)).
    """

    d: int
    K: int
    noise: NoiseKind = "uniform"
    noise_halfwidth: float = 0.0
    clip_rewards: bool = False

    def sample_contexts(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def mean_rewards(self, X) -> np.ndarray:
        raise NotImplementedError

    def sample_rewards(self, X, arms, rng: np.random.Generator) -> np.ndarray:
        X = as_contexts(X, self.d)
        arms = np.asarray(arms, dtype=np.int64)
        mean = self.mean_rewards(X)[np.arange(X.shape[0]), arms]
        u = rng.random(X.shape[0])
        if self.noise == "bernoulli":
            return (u < mean).astype(float)
        r = mean + self.noise_halfwidth * (2.0 * u - 1.0)
        return np.clip(r, 0.0, 1.0) if self.clip_rewards else r

    # single-round conveniences
    def sample_context(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_contexts(1, rng)[0]

    def mean_reward(self, x, a: int) -> float:
        x = as_context(x, self.d)
        return float(self.mean_rewards(x[None, :])[0, a])

    def sample_reward(self, x, a: int, rng: np.random.Generator) -> float:
        x = as_context(x, self.d)
        return float(self.sample_rewards(x[None, :], [a], rng)[0])

    def optimal_arms(self, X) -> np.ndarray:
        return np.argmax(self.mean_rewards(X), axis=1)

    @property
    def bias_b(self) -> float | None:
        return None


BALL_ARMS_MATCHING = np.array(
    [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.4, 0.6], [0.6, 0.4], [-0.4, -0.6], [-0.6, -0.4]]
)


def ball_arm_set(variant: str = "matching") -> np.ndarray:
    """Arm parameters with |a| + |b| = 1 and |a|, |b| in {0, 0.4, 0.6, 1}.

    The full constraint set has 12 sign patterns; ``matching`` keeps the four
    axis vectors plus the four off-axis vectors whose coordinates share a sign.
    """
    if variant == "matching":
        return BALL_ARMS_MATCHING.copy()
    if variant == "full":
        axis = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
        off = [[sa * u, sb * (1 - u)] for u in (0.4, 0.6) for sa in (1, -1) for sb in (1, -1)]
        return np.array(axis + off)
    raise InvalidInputError(f"unknown arm set {variant!r}")


@dataclass
class BallDgp(Environment):
    """Two-dimensional unit-circle contexts in four regions, 0.4 plus linear rewards.

    ``region_fix=False`` keeps region 3 identical to region 2 as printed in the
    source description; ``True`` maps region 3 to ``(-x2, -x1)`` so the four
    regions are the four axis directions.
    """

    reward_scale: float = 0.2
    noise_halfwidth: float = 0.4
    region_fix: bool = False
    arm_set: str = "matching"
    clip_rewards: bool = False
    theta: np.ndarray = field(init=False)

    def __post_init__(self):
        self.theta = ball_arm_set(self.arm_set)
        self.d = 2
        self.K = self.theta.shape[0]
        self.noise = "uniform"

    def sample_contexts(self, n: int, rng: np.random.Generator) -> np.ndarray:
        x1 = rng.uniform(0.8, 1.0, size=n)
        z = rng.choice(np.array([-1.0, 1.0]), size=n)
        x2 = np.sqrt(1.0 - x1**2) * z
        region = rng.integers(0, 4, size=n)
        X = np.empty((n, 2))
        third = np.column_stack([-x2, -x1]) if self.region_fix else np.column_stack([-x1, -x2])
        choices = [np.column_stack([x1, x2]), np.column_stack([x2, x1]), np.column_stack([-x1, -x2]), third]
        for r, c in enumerate(choices):
            sel = region == r
            X[sel] = c[sel]
        return X

    def mean_rewards(self, X) -> np.ndarray:
        X = as_contexts(X, 2)
        return 0.4 + self.reward_scale * X @ self.theta.T

    def true_model(self) -> LinearRewardModel:
        return LinearRewardModel(self.reward_scale * self.theta, np.full(self.K, 0.4))


def ball_sample_context(rng: np.random.Generator, region_fix: bool = False) -> np.ndarray:
    return BallDgp(region_fix=region_fix).sample_context(rng)


def ball_mean_reward(x, a: int, reward_scale: float = 0.2, arm_set: str = "matching") -> float:
    return BallDgp(reward_scale=reward_scale, arm_set=arm_set).mean_reward(x, a)


@dataclass
class AtomGapInstance(Environment):
    """Discrete contexts ``0, e_1, ..., e_d`` with an affine (hence realizable) reward table.

    ``values[r, a]`` is the mean reward of arm ``a`` at atom ``r``; atoms are
    drawn with probabilities ``weights``.
    """

    values: np.ndarray
    weights: np.ndarray
    A: int
    lam: float
    Delta: float
    noise: NoiseKind = "bernoulli"
    noise_halfwidth: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.K = self.values.shape[1]
        self.d = self.values.shape[0] - 1
        self.atoms = np.vstack([np.zeros(self.d), np.eye(self.d)])

    def sample_contexts(self, n: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(self.atoms.shape[0], size=n, p=self.weights)
        return self.atoms[idx].copy()

    def true_model(self) -> LinearRewardModel:
        base = self.values[0]
        return LinearRewardModel((self.values[1:] - base).T, base, -np.inf, np.inf)

    def mean_rewards(self, X) -> np.ndarray:
        X = as_contexts(X, self.d)
        return X @ (self.values[1:] - self.values[0]) + self.values[0]

    @property
    def bias_b(self) -> float:
        return 0.0


def make_gap_instance(
    K: int, d: int, A: int, lam: float, Delta: float, noise: NoiseKind = "bernoulli"
) -> AtomGapInstance:
    """Linear instance where, on a ``1 - lam`` share of contexts, exactly ``A`` arms have regret below ``Delta``.

    The best arm at atom ``r`` is ``r mod K``; the next ``A - 1`` arms (cyclically)
    sit strictly within ``Delta`` of it, every other arm trails by at least
    ``Delta`` (the first one by exactly ``Delta``). With ``lam > 0`` the last atom
    carries probability ``lam`` and has all arms tied.
    """
    if not 1 <= A <= K:
        raise InvalidInputError("A must lie in [1, K]")
    if not 0 < Delta <= 1:
        raise InvalidInputError("Delta must lie in (0, 1]")
    if not 0 <= lam <= 1:
        raise InvalidInputError("lam must lie in [0, 1]")
    if d < 1:
        raise InvalidInputError("d must be >= 1")
    n_far = K - A
    spread = min(0.5 * Delta, 1.0 - Delta)
    far_gaps = Delta + (spread * np.arange(n_far) / max(n_far - 1, 1) if n_far > 1 else np.zeros(n_far))
    near_gaps = 0.5 * Delta * np.arange(A) / A
    max_gap = far_gaps.max() if n_far else near_gaps.max()
    if max_gap > 1:
        raise InvalidInputError("gap pattern does not fit in [0, 1]")
    top = 0.5 * (1.0 + max_gap)
    n_atoms = d + 1
    flat = lam > 0
    if flat and n_atoms < 2:
        raise InvalidInputError("lam > 0 needs d >= 1 to host a tied atom")
    values = np.empty((n_atoms, K))
    gaps = np.concatenate([near_gaps, far_gaps])
    for r in range(n_atoms):
        order = (r + np.arange(K)) % K
        values[r, order] = top - gaps
    if flat:
        values[-1] = 0.5
        weights = np.full(n_atoms, (1.0 - lam) / (n_atoms - 1))
        weights[-1] = lam
        if lam == 1:
            weights[:-1] = 0.0
    else:
        weights = np.full(n_atoms, 1.0 / n_atoms)
    return AtomGapInstance(values=values, weights=weights, A=A, lam=lam, Delta=Delta, noise=noise)


def fraction_within_gap(env: Environment, X, Delta: float, A: int) -> float:
    """Share of contexts where at most ``A`` arms have true regret strictly below ``Delta``."""
    mu = env.mean_rewards(X)
    regret = mu.max(axis=1, keepdims=True) - mu
    return float(np.mean((regret < Delta - 1e-12).sum(axis=1) <= A))


def estimate_affine_bias(env: Environment, n: int, seed: int) -> float:
    """Monte-Carlo ``min over affine models`` of the squared error under uniform logging."""
    rng = np.random.default_rng(seed)
    X = env.sample_contexts(n, rng)
    arms = rng.integers(env.K, size=n)
    target = env.mean_rewards(X)[np.arange(n), arms]
    sq = 0.0
    for a in range(env.K):
        sel = arms == a
        if not sel.any():
            continue
        W, b = _ridge_affine(X[sel], target[sel][:, None], 0.0)
        resid = target[sel] - (X[sel] @ W[:, 0] + b[0])
        sq += float(np.sum(resid**2))
    return sq / n


@dataclass
class MisspecifiedEnvironment(Environment):
    """``base`` with an arm-alternating bump ``distortion * s_a * h(x)`` added to the means.

    ``h(x) = (x_0^2 - E x_0^2) / sd(x_0^2)``: even in ``x``, so for context
    distributions symmetric under ``x -> -x`` it is uncorrelated with every
    affine function and cannot be absorbed by the model class. Means are
    clamped to [0, 1] afterwards.
    """

    base: Environment
    distortion: float
    calibration_seed: int = 12345
    calibration_n: int = 100_000
    _bias: float | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.distortion < 0:
            raise InvalidInputError("distortion must be non-negative")
        self.d, self.K = self.base.d, self.base.K
        self.noise = self.base.noise
        self.noise_halfwidth = self.base.noise_halfwidth
        self.clip_rewards = self.base.clip_rewards
        X = self.base.sample_contexts(self.calibration_n, np.random.default_rng(self.calibration_seed))
        q = X[:, 0] ** 2
        self._h_mean = float(q.mean())
        self._h_sd = float(q.std()) or 1.0
        self._signs = np.where(np.arange(self.K) % 2 == 0, 1.0, -1.0)

    def sample_contexts(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.base.sample_contexts(n, rng)

    def bump(self, X) -> np.ndarray:
        X = as_contexts(X, self.d)
        return (X[:, 0] ** 2 - self._h_mean) / self._h_sd

    def mean_rewards(self, X) -> np.ndarray:
        X = as_contexts(X, self.d)
        shifted = self.base.mean_rewards(X) + self.distortion * self.bump(X)[:, None] * self._signs
        return np.clip(shifted, 0.0, 1.0)

    def estimate_bias(self, n: int = 1_000_000, seed: int = 0) -> float:
        return estimate_affine_bias(self, n, seed)

    @property
    def bias_b(self) -> float:
        if self._bias is None:
            self._bias = self.estimate_bias(200_000, seed=0)
        return self._bias


def make_misspecified(base: Environment, distortion: float) -> MisspecifiedEnvironment:
    return MisspecifiedEnvironment(base=base, distortion=distortion)
