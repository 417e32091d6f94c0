"""Compare RAPR against uniform, LinUCB and LinTS on the unit-circle environment.

Prints the mean exploration reward and the mean value of the learned policy
for each algorithm, the two axes of the exploration/learning trade-off.

    python3 demos/ball_comparison.py --runs 10
"""
import argparse

from rapr.harness import AlgoSpec, EnvSpec, ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--T", type=int, default=5000)
    args = ap.parse_args()

    sim = {"preset": "simulation", "xi_scale": 0.25, "bloat": 1.0}
    cfg = ExperimentConfig(
        env=EnvSpec("ball", {"region_fix": True}),
        algos=[
            AlgoSpec("rapr", omega=1.0, params=sim),
            AlgoSpec("rapr", omega=4.0, params=sim),
            AlgoSpec("uniform"),
            AlgoSpec("linucb"),
            AlgoSpec("lints"),
        ],
        T=args.T,
        runs=args.runs,
    )
    summary, _ = run_experiment(cfg)
    print(f"{'algo':<8} {'explore':>9} {'learned':>9} {'stderr':>8}")
    for tag, s in summary.items():
        e, v = s["exploration_mean_reward"], s["learned_policy_value"]
        print(f"{tag:<8} {e['mean']:9.4f} {v['mean']:9.4f} {v['stderr']:8.4f}")


if __name__ == "__main__":
    main()
