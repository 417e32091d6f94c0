import math

import numpy as np
import pytest

from rapr.algorithm import RaprConfig, rapr_run
from rapr.core import InvalidInputError
from rapr.envs import (
    BallDgp,
    ball_arm_set,
    ball_mean_reward,
    ball_sample_context,
    estimate_affine_bias,
    fraction_within_gap,
    make_gap_instance,
    make_misspecified,
)


@pytest.mark.parametrize("region_fix", [False, True])
def test_ball_contexts_on_unit_circle(region_fix):
    env = BallDgp(region_fix=region_fix)
    X = env.sample_contexts(20_000, np.random.default_rng(0))
    assert np.allclose(np.linalg.norm(X, axis=1), 1.0, atol=1e-12)
    # the larger coordinate in magnitude is always x~1 in [0.8, 1]
    big = np.abs(X).max(axis=1)
    assert np.all((big >= 0.8) & (big <= 1.0))
    x = ball_sample_context(np.random.default_rng(1), region_fix)
    assert x.shape == (2,)


def test_ball_verbatim_regions_repeat_third_branch():
    X = BallDgp(region_fix=False).sample_contexts(20_000, np.random.default_rng(2))
    dominant = np.abs(X).argmax(axis=1) * 2 + (X[np.arange(len(X)), np.abs(X).argmax(axis=1)] < 0)
    freq = np.bincount(dominant, minlength=4) / len(X)
    # +e1, -e1 (regions 2 and 3), +e2, never -e2
    assert freq[3] == 0.0
    assert freq[1] == pytest.approx(0.5, abs=0.02)


def test_ball_region_fix_quadrant_frequencies():
    n = 100_000
    X = BallDgp(region_fix=True).sample_contexts(n, np.random.default_rng(3))
    axis = np.abs(X).argmax(axis=1)
    neg = X[np.arange(n), axis] < 0
    freq = np.bincount(axis * 2 + neg, minlength=4) / n
    sigma = math.sqrt(0.25 * 0.75 / n)
    assert np.all(np.abs(freq - 0.25) <= 3 * sigma)
    other = X[np.arange(n), 1 - axis]
    assert np.mean(other > 0) == pytest.approx(0.5, abs=3 * math.sqrt(0.25 / n))


def test_ball_mean_reward_range_and_values():
    env = BallDgp(region_fix=True)
    X = env.sample_contexts(1_000_000, np.random.default_rng(4))
    mu = env.mean_rewards(X)
    assert mu.min() >= 0.2 - 1e-12 and mu.max() <= 0.6 + 1e-12
    assert ball_mean_reward([1.0, 0.0], 0) == pytest.approx(0.6)
    assert ball_mean_reward([-1.0, 0.0], 0) == pytest.approx(0.2)


def test_arm_sets():
    m = ball_arm_set("matching")
    f = ball_arm_set("full")
    assert m.shape == (8, 2) and f.shape == (12, 2)
    for s in (m, f):
        assert np.allclose(np.abs(s).sum(axis=1), 1.0)
        assert len({tuple(r) for r in s}) == len(s)
    assert {tuple(r) for r in m} <= {tuple(r) for r in f}
    with pytest.raises(InvalidInputError):
        ball_arm_set("other")


def test_ball_reward_noise_mean():
    env = BallDgp(region_fix=True)
    rng = np.random.default_rng(5)
    x = np.array([0.6, 0.8])
    r = env.sample_rewards(np.tile(x, (100_000, 1)), np.full(100_000, 4), rng)
    mu = env.mean_reward(x, 4)
    sd = 0.4 / math.sqrt(3)
    assert abs(r.mean() - mu) <= 3 * sd / math.sqrt(len(r))
    assert r.min() >= mu - 0.4 and r.max() <= mu + 0.4
    clipped = BallDgp(region_fix=True, clip_rewards=True)
    rc = clipped.sample_rewards(np.tile([-1.0, 0.0], (1000, 1)), np.zeros(1000, dtype=int), rng)
    assert rc.min() >= 0.0


def test_gap_instance_two_arm_uniform_gap():
    env = make_gap_instance(K=2, d=1, A=1, lam=0.0, Delta=0.3)
    X = env.sample_contexts(10_000, np.random.default_rng(0))
    mu = env.mean_rewards(X)
    assert np.allclose(np.abs(mu[:, 0] - mu[:, 1]), 0.3)
    assert fraction_within_gap(env, X, 0.3, 1) == 1.0


@pytest.mark.parametrize("K,d,A,lam", [(4, 3, 1, 0.0), (8, 15, 2, 0.2), (5, 4, 3, 0.5), (6, 2, 6, 0.0), (3, 2, 1, 1.0)])
def test_gap_instance_declared_condition(K, d, A, lam):
    env = make_gap_instance(K=K, d=d, A=A, lam=lam, Delta=0.3)
    X = env.sample_contexts(10_000, np.random.default_rng(1))
    mu = env.mean_rewards(X)
    assert mu.min() >= 0 and mu.max() <= 1
    regret = mu.max(axis=1, keepdims=True) - mu
    n_near = (regret < 0.3 - 1e-12).sum(axis=1)
    ok = n_near == A
    assert ok.mean() >= 1 - lam - 0.02
    far = regret[regret >= 0.3 - 1e-12]
    assert np.all(far >= 0.3 - 1e-12)
    # realizable: the true model reproduces the means
    assert np.allclose(env.true_model().predict(X), mu)


def test_gap_instance_errors():
    with pytest.raises(InvalidInputError):
        make_gap_instance(K=3, d=2, A=4, lam=0.0, Delta=0.3)
    with pytest.raises(InvalidInputError):
        make_gap_instance(K=3, d=2, A=1, lam=0.0, Delta=1.5)
    with pytest.raises(InvalidInputError):
        make_gap_instance(K=3, d=2, A=1, lam=-0.1, Delta=0.3)


def test_bernoulli_rewards_mean():
    env = make_gap_instance(K=3, d=2, A=1, lam=0.0, Delta=0.3)
    rng = np.random.default_rng(6)
    x = env.atoms[1]
    r = env.sample_rewards(np.tile(x, (100_000, 1)), np.full(100_000, 2), rng)
    mu = env.mean_reward(x, 2)
    assert set(np.unique(r)) <= {0.0, 1.0}
    assert abs(r.mean() - mu) <= 3 * math.sqrt(mu * (1 - mu) / len(r))


def test_misspecified_zero_distortion_matches_base():
    base = BallDgp(region_fix=True)
    env = make_misspecified(base, 0.0)
    X = base.sample_contexts(1000, np.random.default_rng(0))
    assert np.array_equal(env.mean_rewards(X), base.mean_rewards(X))
    assert estimate_affine_bias(env, 100_000, seed=1) < 1e-20


def test_misspecified_bump_orthogonal_and_bias_stable():
    env = make_misspecified(BallDgp(region_fix=True), 0.3)
    X = env.sample_contexts(200_000, np.random.default_rng(2))
    h = env.bump(X)
    assert abs(h.mean()) < 0.01
    assert abs(np.mean(h * X[:, 0])) < 0.01 and abs(np.mean(h * X[:, 1])) < 0.01
    b1 = env.estimate_bias(1_000_000, seed=10)
    b2 = env.estimate_bias(1_000_000, seed=11)
    assert b1 > 0
    assert abs(b1 - b2) <= 0.05 * max(b1, b2)
    mu = env.mean_rewards(X)
    assert mu.min() >= 0 and mu.max() <= 1
    with pytest.raises(InvalidInputError):
        make_misspecified(BallDgp(), -1.0)


def test_large_distortion_trips_the_test_in_most_runs():
    env = make_misspecified(BallDgp(region_fix=True), 1.0)
    cfg = RaprConfig.simulation(omega=1, xi_scale=0.47)
    flips = sum(not rapr_run(env, 5000, cfg, seed=s).state.safe for s in range(2000, 2040))
    assert flips > 20
