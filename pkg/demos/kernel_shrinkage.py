"""How the conformal arm sets and the kernel react to the width scale.

On a two-arm instance with a 0.3 gap the kernel stays uniform while the
widths exceed every gap, and concentrates on the greedy arm once they do not.
The exact probabilities are checked against Monte-Carlo draws.
"""
import numpy as np

from rapr import RaprConfig, make_gap_instance, rapr_run


def describe(bloat):
    env = make_gap_instance(K=2, d=1, A=1, lam=0.0, Delta=0.3)
    res = rapr_run(env, 400, RaprConfig.simulation(omega=2.0, bloat=bloat), seed=0)
    k = res.state.active_kernel
    x = env.atoms[0]
    p = k.probs(x[None, :])[0]
    draws = k.sample_many(x, np.random.default_rng(1), 100_000)
    freq = np.bincount(draws, minlength=2) / len(draws)
    u = [round(e.u, 4) for e in k.history]
    print(f"bloat={bloat:<5} epochs={k.m} eta={k.eta:.2f} U={u}")
    print(f"  exact probs {np.round(p, 4)}  sampled {np.round(freq, 4)}")
    print(f"  set at zeta=0.1: {k.members(x, 0.1).tolist()}")


if __name__ == "__main__":
    for b in (1.0, 0.01):
        describe(b)
