"""Simple regret of K-RAPR and of a uniform experiment as the horizon grows."""
import numpy as np

from rapr import RaprConfig, make_gap_instance, rapr_run, run_baseline
from rapr.harness.metrics import simple_regret_on


def main(seeds=10):
    env = make_gap_instance(K=8, d=15, A=1, lam=0.0, Delta=0.3)
    X = env.sample_contexts(10_000, np.random.default_rng(0))
    cfg = RaprConfig.simulation(omega=8.0)
    print(f"{'T':>6} {'rapr':>8} {'uniform':>8}")
    for T in (512, 1024, 2048, 4096, 8192):
        r = np.mean([simple_regret_on(rapr_run(env, T, cfg, s).policy, env, X).mean() for s in range(seeds)])
        u = np.mean([simple_regret_on(run_baseline(env, T, "uniform", s).policy, env, X).mean() for s in range(seeds)])
        print(f"{T:6d} {r:8.4f} {u:8.4f}")


if __name__ == "__main__":
    main()
