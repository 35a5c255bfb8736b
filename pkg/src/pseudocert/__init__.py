"""Certification toolkit for pseudo-label self-training.

Calculators for population-risk bounds built on randomized-label training
performance, synthetic data with auditable label corruption, pluggable
learners, the certified self-training loop, and statistical verification
campaigns that check the theory's guarantees numerically.
"""

__version__ = "0.1.0"

from .bounds import (
    BoundIteration,
    BoundReport,
    ConvergenceSpec,
    EmpiricalErrors,
    FeasibilityError,
    ProblemSpec,
    SplitSpec,
    bound_map,
    convergence_ratios,
    feasibility_threshold,
    is_feasible_gamma,
    iterate_bound_map,
    max_randomized_count,
    min_unlabeled_for_rate,
    min_unlabeled_self_consistent,
    optimal_split,
    rate_threshold_value,
    ratt_bound_full,
    ratt_bound_relaxed,
    supervised_ceiling,
)
from .datagen import (
    DataDistribution,
    Dataset,
    LabeledExample,
    Provenance,
    apply_pseudo_labels,
    bayes_labels,
    estimate_bayes_risk,
    load_dataset,
    mislabel,
    randomize_labels,
    randomize_labels_at,
    sample,
    save_dataset,
    simplex_mixture,
)
from .learners import (
    CentroidModel,
    LearnerConfig,
    LogisticModel,
    Model,
    OracleModel,
    TrainingError,
    empirical_error,
    fit,
    load_model,
    oracle_model,
    predict,
    save_model,
)
from .engine import (
    EngineConfig,
    FixedCount,
    FractionOfMax,
    MaxAllowed,
    Trajectory,
    TrajectoryRecord,
    run_certified,
    run_plain,
    trajectory_csv,
    write_trajectory_csv,
)
from .harness import (
    AuditReport,
    CoverageReport,
    LimitReport,
    RateReport,
    coverage_experiment,
    limit_curve,
    rate_experiment,
    separation_audit,
    write_report,
)
