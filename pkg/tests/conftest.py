import numpy as np
import pytest

from rapr.cas import EpochHistoryEntry, ProportionalResponseKernel
from rapr.core import LinearRewardModel


def random_history(rng: np.random.Generator, K: int, d: int, m: int) -> list[EpochHistoryEntry]:
    """Zero model first, then random affine models with small widths so the sets actually shrink."""
    hist = [EpochHistoryEntry(LinearRewardModel.zeros(K, d), alpha_prev=3.0 * K, xi=1.0, bloat=1.0)]
    for _ in range(m - 1):
        model = LinearRewardModel(rng.normal(scale=0.3, size=(K, d)), rng.uniform(0.2, 0.8, size=K))
        hist.append(
            EpochHistoryEntry(
                model,
                alpha_prev=float(rng.uniform(1.0, 3.0 * K)),
                xi=float(rng.uniform(1e-4, 1e-2)),
                bloat=float(10 ** rng.uniform(-3, -1)),
            )
        )
    return hist


def random_kernel(rng: np.random.Generator, K_max: int = 16, d_max: int = 4) -> ProportionalResponseKernel:
    K = int(rng.integers(1, K_max + 1))
    d = int(rng.integers(1, d_max + 1))
    m = int(rng.integers(1, 6))
    eta = float(rng.uniform(1.0, 4.0))
    return ProportionalResponseKernel(tuple(random_history(rng, K, d, m)), eta=eta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
