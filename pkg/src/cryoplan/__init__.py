"""Budgeted data-acquisition planning on a grid/square/patch/hole hierarchy.

The package simulates microscope collection sessions over synthetic
atlases, trains a Q-network planner with optional action elimination, and
benchmarks it against greedy, genetic, annealing, and random baselines
under a shared cost model.  A small HTTP service exposes the same worlds
for interactive human benchmarking.
"""

from .atlas import (
    CTF_THRESHOLD,
    BudgetExceeded,
    Dataset,
    EpisodeState,
    Grid,
    Hole,
    IllegalAction,
    MoveClass,
    Patch,
    RewardTable,
    Square,
    TrajectoryStep,
    cost_penalty,
    move_class,
    move_cost,
    new_episode,
    objective_value,
    step_reward,
)
from .baselines import (
    GaConfig,
    SaConfig,
    execute_plan,
    ga_optimize,
    greedy_plan,
    random_policy,
    sa_optimize,
)
from .classifier import (
    ClassifierModel,
    PredictionTable,
    QualityCounter,
    empirical_confusion,
    predict_all,
)
from .datagen import GenConfig, SplitSpec, generate, load, save, split, y1_config
from .dqn import Policy, TrainConfig, run_policy, train
from .elimination import ElimConfig, eliminate, max_lctf, rank_patches
from .features import FeatureConfig, encode_state_action, encode_step
from .harness import (
    DqnRunner,
    GaRunner,
    GreedyRunner,
    RandomRunner,
    SaRunner,
    TrialReport,
    compare,
    export_visit_graph,
    run_trials,
)
from .mlp import AdamState, Mlp, adam_step

__version__ = "0.1.0"

__all__ = [
    "CTF_THRESHOLD",
    "AdamState",
    "BudgetExceeded",
    "ClassifierModel",
    "Dataset",
    "DqnRunner",
    "ElimConfig",
    "EpisodeState",
    "FeatureConfig",
    "GaConfig",
    "GaRunner",
    "GenConfig",
    "GreedyRunner",
    "Grid",
    "Hole",
    "IllegalAction",
    "Mlp",
    "MoveClass",
    "Patch",
    "Policy",
    "PredictionTable",
    "QualityCounter",
    "RandomRunner",
    "RewardTable",
    "SaConfig",
    "SaRunner",
    "SplitSpec",
    "Square",
    "TrainConfig",
    "TrajectoryStep",
    "TrialReport",
    "adam_step",
    "compare",
    "cost_penalty",
    "eliminate",
    "empirical_confusion",
    "encode_state_action",
    "encode_step",
    "execute_plan",
    "export_visit_graph",
    "ga_optimize",
    "generate",
    "greedy_plan",
    "load",
    "max_lctf",
    "move_class",
    "move_cost",
    "new_episode",
    "objective_value",
    "predict_all",
    "random_policy",
    "rank_patches",
    "run_policy",
    "run_trials",
    "sa_optimize",
    "save",
    "split",
    "step_reward",
    "train",
    "y1_config",
]
