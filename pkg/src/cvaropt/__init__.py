"""Adaptive-sampling optimization of Conditional Value-at-Risk.

A mini-batch learner plays against an adaptive index sampler whose
distribution follows exponential weights through subset-inclusion
marginals; the library also ships truncated-CVaR, smoothed-CVaR, and
plain-mean baselines plus a seeded experiment harness.
"""

from .risk import (
    RiskLevel,
    empirical_cvar,
    empirical_var,
    rockafellar_objective,
    dro_inner_max,
    topk_mean,
    check_capped_simplex,
)
from .kdpp import (
    Marginals,
    NuSolution,
    InfeasibleConstraintError,
    elementary_symmetric,
    exact_marginals,
    approx_marginals,
    marginals,
    solve_nu,
    tv_distance,
    EXACT_THRESHOLD,
)
from .sumtree import SumTree
from .sampler import (
    EtaSchedule,
    KdppSampler,
    LossEstimate,
    eta_at,
    sampler_regret,
    uniform_index,
)
from .learners import (
    LossSpec,
    ModelParams,
    Optimizer,
    calibrate_scale,
    finite_diff_grad,
    init_params,
    loss_and_grad,
    loss_coeffs,
    loss_values,
    optimizer_step,
    predict,
)
from .algorithms import (
    ALGORITHMS,
    NumericOverflowError,
    RunTrace,
    TrainConfig,
    cvar_oracle,
    game_regret,
    model_metrics,
    select_output,
    soft_objective,
    train,
    train_ada_cvar,
    train_mean,
    train_soft_cvar,
    train_trunc_cvar,
    trunc_objective,
)
from .data import (
    CsvParseError,
    Dataset,
    ShiftSpec,
    SplitSpec,
    SYNTHETIC_NAMES,
    apply_shift,
    gen_synthetic,
    load_csv,
    split,
    standardize,
    write_csv,
)
from .bench import (
    MarginalsBenchResult,
    RegretBenchResult,
    marginals_bench,
    regret_bench,
    regret_run,
)

__version__ = "0.1.0"

__all__ = [
    "RiskLevel", "empirical_cvar", "empirical_var", "rockafellar_objective",
    "dro_inner_max", "topk_mean", "check_capped_simplex",
    "Marginals", "NuSolution", "InfeasibleConstraintError",
    "elementary_symmetric", "exact_marginals", "approx_marginals",
    "marginals", "solve_nu", "tv_distance", "EXACT_THRESHOLD",
    "SumTree",
    "EtaSchedule", "KdppSampler", "LossEstimate", "eta_at",
    "sampler_regret", "uniform_index",
    "LossSpec", "ModelParams", "Optimizer", "calibrate_scale",
    "finite_diff_grad", "init_params", "loss_and_grad", "loss_coeffs",
    "loss_values", "optimizer_step", "predict",
    "ALGORITHMS", "NumericOverflowError", "RunTrace", "TrainConfig",
    "cvar_oracle", "game_regret", "model_metrics", "select_output",
    "soft_objective", "train", "train_ada_cvar", "train_mean",
    "train_soft_cvar", "train_trunc_cvar", "trunc_objective",
    "CsvParseError", "Dataset", "ShiftSpec", "SplitSpec", "SYNTHETIC_NAMES",
    "apply_shift", "gen_synthetic", "load_csv", "split", "standardize",
    "write_csv",
    "MarginalsBenchResult", "RegretBenchResult", "marginals_bench",
    "regret_bench", "regret_run",
    "__version__",
]
