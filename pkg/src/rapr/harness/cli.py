"""Command line entry point: ``rapr run --config exp.json [overrides]``."""
from __future__ import annotations

import argparse
import json
import sys

from ..core import InvalidInputError
from .runner import ALGOS, ENVS, AlgoSpec, EnvSpec, ExperimentConfig, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rapr", description="Run contextual bandit experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment and write trace, summary and scatter files")
    run.add_argument("--config", help="JSON file mirroring ExperimentConfig")
    run.add_argument("--env", choices=ENVS, help="environment name (keeps configured params if the name matches)")
    run.add_argument("--algo", choices=ALGOS, help="run a single algorithm instead of the configured list")
    run.add_argument("--omega", type=float, help="RAPR omega for --algo rapr")
    run.add_argument("--T", type=int, help="horizon")
    run.add_argument("--delta", type=float, help="confidence level")
    run.add_argument("--runs", type=int, help="number of seeds")
    run.add_argument("--seed", type=int, help="base seed")
    run.add_argument("--out", help="output directory")
    run.add_argument("--workers", type=int, help="processes to run seeds in parallel")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict = {}
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
    cfg = ExperimentConfig.from_dict(raw)
    if args.env is not None and args.env != cfg.env.name:
        cfg.env = EnvSpec(name=args.env)
    if args.algo is not None:
        cfg.algos = [AlgoSpec(name=args.algo, omega=args.omega if args.omega is not None else 1.0)]
    elif args.omega is not None:
        for a in cfg.algos:
            if a.name == "rapr":
                a.omega = args.omega
    for key in ("T", "delta", "runs", "out", "workers"):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    if args.seed is not None:
        cfg.base_seed = args.seed
        cfg.seeds = None
    if args.runs is not None:
        cfg.seeds = None
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        summary, _ = run_experiment(cfg)
    except (InvalidInputError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for tag, entry in summary.items():
        lv, ex = entry["learned_policy_value"], entry["exploration_mean_reward"]
        print(
            f"{tag:>10}  runs={entry['runs']:<3d} learned={lv['mean']:.4f} (se {lv['stderr']:.4f})"
            f"  exploration={ex['mean']:.4f} (se {ex['stderr']:.4f})"
        )
    if cfg.out:
        print(f"wrote {cfg.out}")
    return 0
