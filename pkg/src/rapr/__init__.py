"""Risk-adjusted proportional response exploration for contextual bandits."""
from .algorithm import (
    InvariantViolation,
    MisspecResult,
    RaprConfig,
    RaprResult,
    RaprState,
    advance_epoch,
    choose_eta,
    end_epoch,
    learn_final_policy,
    misspec_test,
    rapr_run,
)
from .baselines import LinUcbState, linucb_step, lints_step, run_baseline, uniform_step
from .cas import (
    EpochHistoryEntry,
    ProportionalResponseKernel,
    breakpoints,
    cas_mask,
    cas_members,
    kernel_prob,
    kernel_sample,
    mean_cbar_size,
    membership_beta,
)
from .core import (
    ArmAssignment,
    EpochDataset,
    GreedyPolicy,
    InvalidInputError,
    LinearRewardModel,
    LoggedData,
    LoggedSample,
    RunTrace,
    UniformKernel,
    greedy_arm,
    model_predict,
    split_three,
)
from .envs import AtomGapInstance, BallDgp, MisspecifiedEnvironment, make_gap_instance, make_misspecified
from .oracles import (
    CscProblem,
    XiRateConfig,
    csc_argmax,
    epoch_schedule,
    fit_reward_model,
    ips_table,
    ips_value,
    model_value,
    xi_for_epoch,
)
