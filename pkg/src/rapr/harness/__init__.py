"""Experiment harness: metrics, replication runner and CLI."""
from .metrics import (
    coverage_on,
    cover_on,
    estimate_cumulative_regret,
    estimate_optimal_cover,
    estimate_simple_regret,
    exploration_mean_reward,
    policy_value,
)
from .runner import AlgoSpec, EnvSpec, ExperimentConfig, RunOutcome, run_experiment, run_single, summarize
