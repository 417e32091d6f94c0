"""Experiment configuration, replication runner and plot-ready file output."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..algorithm import RaprConfig, rapr_run
from ..baselines import run_baseline
from ..core import InvalidInputError, RunTrace
from ..envs import BallDgp, make_gap_instance, make_misspecified
from .metrics import estimate_cumulative_regret, exploration_mean_reward, policy_value, simple_regret_on

ALGOS = ("rapr", "uniform", "linucb", "lints")
ENVS = ("ball", "gap", "misspecified")


@dataclass
class EnvSpec:
    """``name`` selects the environment; ``params`` are its keyword arguments.

    ``misspecified`` wraps a base spec given as ``params["base"]`` (default
    ``ball``) with ``params["distortion"]``.
    """

    name: str = "ball"
    params: dict = field(default_factory=dict)

    def build(self):
        p = dict(self.params)
        if self.name == "ball":
            return BallDgp(**p)
        if self.name == "gap":
            return make_gap_instance(**p)
        if self.name == "misspecified":
            base = p.pop("base", {"name": "ball", "params": {}})
            distortion = p.pop("distortion", 0.3)
            if p:
                raise InvalidInputError(f"unknown misspecified params {sorted(p)}")
            return make_misspecified(EnvSpec(**base).build(), distortion)
        raise InvalidInputError(f"unknown env {self.name!r}; choose from {ENVS}")


@dataclass
class AlgoSpec:
    name: str = "rapr"
    omega: float = 1.0
    label: str | None = None
    # extra RaprConfig fields for rapr, ucb_scale for linucb/lints
    params: dict = field(default_factory=dict)

    @property
    def tag(self) -> str:
        if self.label:
            return self.label
        return f"{self.omega:g}-rapr" if self.name == "rapr" else self.name

    def validate(self, K: int) -> None:
        if self.name not in ALGOS:
            raise InvalidInputError(f"unknown algo {self.name!r}; choose from {ALGOS}")
        if self.name == "rapr":
            self.rapr_config(0.05).validate(K)

    def rapr_config(self, delta: float) -> RaprConfig:
        p = dict(self.params)
        preset = p.pop("preset", "simulation")
        p.setdefault("delta", delta)
        if preset == "simulation":
            return RaprConfig.simulation(omega=self.omega, **p)
        if preset == "theory":
            return RaprConfig(omega=self.omega, **p)
        raise InvalidInputError(f"unknown rapr preset {preset!r}")


@dataclass
class ExperimentConfig:
    env: EnvSpec = field(default_factory=EnvSpec)
    algos: list[AlgoSpec] = field(default_factory=lambda: [AlgoSpec()])
    T: int = 5000
    delta: float = 0.05
    base_seed: int = 0
    runs: int = 1
    seeds: list[int] | None = None
    out: str | None = None
    eval_contexts: int = 10_000
    eval_seed: int = 987_654_321
    write_traces: bool = True
    workers: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown config keys {sorted(unknown)}")
        if "env" in d and isinstance(d["env"], dict):
            d["env"] = EnvSpec(**d["env"])
        if "algos" in d:
            d["algos"] = [a if isinstance(a, AlgoSpec) else AlgoSpec(**a) for a in d["algos"]]
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return [int(s) for s in self.seeds]
        return [self.base_seed + i for i in range(self.runs)]

    def validate(self) -> None:
        if self.T < 1:
            raise InvalidInputError("T must be >= 1")
        if not 0 < self.delta < 1:
            raise InvalidInputError("delta must lie in (0, 1)")
        if self.eval_contexts < 2:
            raise InvalidInputError("eval_contexts must be >= 2")
        if not self.algos:
            raise InvalidInputError("no algorithms configured")
        tags = [a.tag for a in self.algos]
        if len(set(tags)) != len(tags):
            raise InvalidInputError(f"duplicate algorithm labels {tags}")
        env = self.env.build()
        for a in self.algos:
            a.validate(env.K)


@dataclass
class RunOutcome:
    algo: str
    seed: int
    exploration_mean_reward: float
    learned_policy_value: float
    simple_regret: float
    cumulative_regret: float
    final_safe: bool
    trace: RunTrace | None = None
    epoch_covers: list[float] = field(default_factory=list)


def run_single(cfg: ExperimentConfig, algo: AlgoSpec, seed: int, keep_trace: bool = True) -> RunOutcome:
    """One replication; evaluation contexts are shared across algorithms and seeds."""
    env = cfg.env.build()
    X_eval = env.sample_contexts(cfg.eval_contexts, np.random.default_rng(cfg.eval_seed))
    covers: list[float] = []
    if algo.name == "rapr":
        res = rapr_run(env, cfg.T, algo.rapr_config(cfg.delta), seed)
        trace, policy, safe = res.trace, res.policy, res.state.safe
        best = env.optimal_arms(X_eval)
        idx = np.arange(X_eval.shape[0])
        covers = [float(np.mean(1.0 / k.probs(X_eval)[idx, best])) for k in res.epoch_kernels]
    else:
        res = run_baseline(env, cfg.T, algo.name, seed, **algo.params)
        trace, policy, safe = res.trace, res.policy, True
    return RunOutcome(
        algo=algo.tag,
        seed=seed,
        exploration_mean_reward=exploration_mean_reward(trace, env),
        learned_policy_value=policy_value(policy, env, X_eval),
        simple_regret=float(simple_regret_on(policy, env, X_eval).mean()),
        cumulative_regret=estimate_cumulative_regret(trace, env),
        final_safe=bool(safe),
        trace=trace if keep_trace else None,
        epoch_covers=covers,
    )


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_trace_csv(path: Path, trace: RunTrace, run_id: int) -> None:
    d = trace.contexts.shape[1]
    header = ["run_id", "t", "epoch", *[f"x_{j}" for j in range(d)], "arm", "reward", "propensity", "safe"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t in range(trace.contexts.shape[0]):
            w.writerow(
                [
                    run_id,
                    t + 1,
                    int(trace.epochs[t]),
                    *(_fmt(v) for v in trace.contexts[t]),
                    int(trace.arms[t]),
                    _fmt(trace.rewards[t]),
                    _fmt(trace.propensities[t]),
                    _fmt(bool(trace.safe[t])),
                ]
            )


EPOCH_COLUMNS = ["m", "tau_m", "eta", "alpha", "xi", "safe", "L1", "L2", "L3", "rhs"]


def write_epochs_csv(path: Path, trace: RunTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EPOCH_COLUMNS)
        for rec in trace.epoch_records:
            w.writerow([_fmt(rec[c]) for c in EPOCH_COLUMNS])


def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), math.nan
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def summarize(outcomes: list[RunOutcome]) -> dict:
    """Per-algorithm mean and standard error over seeds, keyed by algorithm label."""
    summary: dict = {}
    for tag in dict.fromkeys(o.algo for o in outcomes):
        rows = [o for o in outcomes if o.algo == tag]
        entry = {"runs": len(rows), "seeds": [o.seed for o in rows]}
        for key in ("exploration_mean_reward", "learned_policy_value", "simple_regret", "cumulative_regret"):
            mean, se = _mean_se([getattr(o, key) for o in rows])
            entry[key] = {"mean": mean, "stderr": se}
        entry["final_safe_runs"] = int(sum(o.final_safe for o in rows))
        n_ep = max((len(o.epoch_covers) for o in rows), default=0)
        if n_ep:
            entry["epoch_cover_mean"] = [
                float(np.mean([o.epoch_covers[e] for o in rows if len(o.epoch_covers) > e])) for e in range(n_ep)
            ]
        summary[tag] = entry
    return summary


def _job(args):
    cfg, algo, seed = args
    return run_single(cfg, algo, seed, keep_trace=cfg.write_traces and cfg.out is not None)


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    return obj


def run_experiment(cfg: ExperimentConfig) -> tuple[dict, list[RunOutcome]]:
    """Run every (algorithm, seed) pair and, if ``cfg.out`` is set, write the output files.

    Layout under ``out``: ``<algo>/trace_<seed>.csv``, ``<algo>/epochs_<seed>.csv``
    (epoch-based algorithms only), ``summary.json`` and ``scatter.csv``.
    """
    cfg.validate()
    seeds = cfg.seed_list()
    jobs = [(cfg, a, s) for a in cfg.algos for s in seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_job, jobs))
    else:
        outcomes = [_job(j) for j in jobs]
    summary = summarize(outcomes)
    if cfg.out is not None:
        _write_outputs(Path(cfg.out), cfg, outcomes, summary)
    return summary, outcomes


def _write_outputs(out: Path, cfg: ExperimentConfig, outcomes: list[RunOutcome], summary: dict) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        for run_id, o in enumerate(outcomes):
            if o.trace is None:
                continue
            sub = out / o.algo
            sub.mkdir(exist_ok=True)
            write_trace_csv(sub / f"trace_{o.seed}.csv", o.trace, run_id)
            if o.trace.epoch_records:
                write_epochs_csv(sub / f"epochs_{o.seed}.csv", o.trace)
        with open(out / "scatter.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["algo", "seed", "exploration_mean_reward", "learned_policy_value"])
            for o in outcomes:
                w.writerow([o.algo, o.seed, _fmt(o.exploration_mean_reward), _fmt(o.learned_policy_value)])
        # where and how the run executed does not belong to the results
        conf = {k: v for k, v in cfg.to_dict().items() if k not in ("out", "workers")}
        doc = {"config": conf, "algorithms": summary}
        with open(out / "summary.json", "w") as fh:
            json.dump(_json_safe(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"failed writing experiment output under {out}: {exc}") from exc
