"""Executable pseudo-label self-training loops with per-iteration certificates.

Two loops over a fixed pool of N unlabeled points:

* ``run_plain`` — the classic iteration: pseudo-label the pool with the
  current model, retrain from scratch, repeat. Recorded but uncertified (no
  randomized subset exists to evaluate a bound on).
* ``run_certified`` — the modified iteration: estimate the current model's
  risk on fresh test data, stop if it reaches the feasibility threshold,
  pseudo-label the pool, randomize the labels of an admissible subset,
  retrain, and record both the bound evaluated at the measured training
  errors and the bound predicted from the risk estimate alone.

The randomized-subset size is capped twice: by the closed-form maximum at
the estimated risk, and by the realized mixture constraint
(m + wrong-pseudo-labels) <= delta_tilde * correct-pseudo-labels evaluated
on the actual pool (the retained true labels make the wrong count exact).
The realized cap is found on a shuffled prefix, where the constraint ratio
is monotone in the prefix length, so the recorded mixture always satisfies
the constraint outright.

Randomness: the run seed expands through ``numpy.random.SeedSequence`` into
one stream per random event, in a fixed documented order (unlabeled pool,
initial bootstrap, then per iteration: test draw, then subset shuffle and
random labels). Identical config and seed give byte-identical trajectories.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .bounds import (
    EmpiricalErrors,
    ProblemSpec,
    SplitSpec,
    bound_map,
    is_feasible_gamma,
    max_randomized_count,
    ratt_bound_relaxed,
)
from .datagen import DataDistribution, Dataset, Provenance, apply_pseudo_labels, randomize_labels_at, sample
from .learners import LearnerConfig, Model, empirical_error, fit

__all__ = [
    "MaxAllowed",
    "FixedCount",
    "FractionOfMax",
    "MPolicy",
    "EngineConfig",
    "TrajectoryRecord",
    "Trajectory",
    "run_plain",
    "run_certified",
    "trajectory_csv",
    "write_trajectory_csv",
    "TRAJECTORY_CSV_HEADER",
]


@dataclass(frozen=True)
class MaxAllowed:
    """Randomize as many labels as the constraints allow."""

    def resolve(self, cap: int) -> int:
        return cap


@dataclass(frozen=True)
class FixedCount:
    """Randomize a fixed number of labels (still capped by the constraints)."""

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("fixed count must be >= 1")

    def resolve(self, cap: int) -> int:
        return min(self.m, cap)


@dataclass(frozen=True)
class FractionOfMax:
    """Randomize a fraction of the allowed maximum."""

    fraction: float

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")

    def resolve(self, cap: int) -> int:
        return math.floor(self.fraction * cap)


MPolicy = Union[MaxAllowed, FixedCount, FractionOfMax]


@dataclass(frozen=True)
class EngineConfig:
    """Everything one self-training run needs.

    ``initial_model`` is either a ready Model or an int: the size of a clean
    labeled bootstrap sample to fit the configured learner on.
    """

    spec: ProblemSpec
    learner: LearnerConfig
    dist: DataDistribution
    unlabeled_count: int
    iterations: int
    test_count: int = 10_000
    m_policy: MPolicy = field(default_factory=MaxAllowed)
    initial_model: Model | int = 500
    seed: int = 0

    def __post_init__(self):
        if self.unlabeled_count < 1:
            raise ValueError("unlabeled_count must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.test_count < 1_000:
            raise ValueError("test_count must be >= 10^3 so risk estimates have resolution")
        if isinstance(self.initial_model, int) and self.initial_model < 1:
            raise ValueError("bootstrap size must be >= 1")


@dataclass(frozen=True)
class TrajectoryRecord:
    """One iteration of a run.

    ``gamma_hat`` is the risk of the iteration's input model measured on a
    fresh test sample; the remaining fields describe the model trained this
    iteration. Bound fields are None for the plain loop. ``n_clean`` and
    ``n_wrong`` count the correct/wrong pseudo-labels left outside the
    randomized subset (diagnostics for the mixture constraint).
    """

    iteration: int
    gamma_hat: float
    m_used: int | None
    e_clean: float | None
    e_random: float | None
    bound_empirical: float | None
    bound_predicted: float | None
    feasible: bool | None
    n_clean: int | None = None
    n_wrong: int | None = None


@dataclass(frozen=True)
class Trajectory:
    """Recorded run: per-iteration records, the last trained model, and why it stopped."""

    records: tuple[TrajectoryRecord, ...]
    final_model: Model
    halt_reason: str  # completed | infeasible_gamma | m_zero


def _seed_streams(seed: int, iterations: int) -> list[int]:
    # documented splitting rule: one uint64 per event, fixed order
    state = np.random.SeedSequence(seed).generate_state(2 + 2 * iterations, dtype=np.uint64)
    return [int(s) for s in state]


def _initial_model(config: EngineConfig, boot_seed: int) -> Model:
    if isinstance(config.initial_model, int):
        boot = sample(config.dist, config.initial_model, boot_seed)
        return fit(config.learner, boot)
    return config.initial_model


def _measure_gamma(model: Model, dist: DataDistribution, count: int, seed: int) -> float:
    test = sample(dist, count, seed)
    preds = model.predict(test.features)
    return float(np.mean(preds != test.true_labels))


def run_plain(config: EngineConfig) -> Trajectory:
    """Classic pseudo-label loop: relabel the pool, retrain, repeat.

    Records the fresh-sample risk estimate of each iteration's input model
    and the new model's training error on the correctly pseudo-labeled
    portion; there is no feasibility gate and no bound certificate.
    """
    seeds = _seed_streams(config.seed, config.iterations)
    pool = sample(config.dist, config.unlabeled_count, seeds[0])
    model = _initial_model(config, seeds[1])
    records: list[TrajectoryRecord] = []
    for i in range(config.iterations):
        gamma_hat = _measure_gamma(model, config.dist, config.test_count, seeds[2 + 2 * i])
        pseudo = apply_pseudo_labels(pool, model)
        next_model = fit(config.learner, pseudo)
        correct = pseudo.provenance_mask(Provenance.PSEUDO_CORRECT)
        e_clean = (
            empirical_error(next_model, pseudo, Provenance.PSEUDO_CORRECT)
            if correct.any() else None
        )
        records.append(TrajectoryRecord(
            iteration=i, gamma_hat=gamma_hat, m_used=None,
            e_clean=e_clean, e_random=None,
            bound_empirical=None, bound_predicted=None, feasible=None,
            n_clean=int(correct.sum()),
            n_wrong=int(len(pseudo) - correct.sum()),
        ))
        model = next_model
    return Trajectory(records=tuple(records), final_model=model, halt_reason="completed")


def _largest_feasible_prefix(wrong_shuffled: np.ndarray, delta_tilde: float, m_max: int) -> int:
    # ratio (m + wrong-outside-prefix) / correct-outside-prefix is monotone
    # nondecreasing in the prefix length m, so the largest admissible prefix
    # is the last index satisfying the constraint.
    n = wrong_shuffled.shape[0]
    m_max = min(m_max, n)
    wrong_total = int(wrong_shuffled.sum())
    wrong_in_prefix = np.concatenate(([0], np.cumsum(wrong_shuffled[:m_max])))
    m = np.arange(m_max + 1)
    wrong_rem = wrong_total - wrong_in_prefix
    correct_rem = (n - m) - wrong_rem
    ok = (m + wrong_rem) <= delta_tilde * correct_rem
    return int(m[ok].max()) if ok.any() else 0


def run_certified(config: EngineConfig) -> Trajectory:
    """Modified pseudo-label loop with risk gate, randomized subset, and bounds.

    Per iteration: estimate the input model's risk on fresh test data; halt
    with ``infeasible_gamma`` if the estimate reaches the feasibility
    threshold; pseudo-label the pool; randomize the labels of the largest
    admissible subset (or what the policy asks for, if smaller); halt with
    ``m_zero`` if no admissible subset of size >= 1 exists; retrain and
    record measured errors plus both bound values.
    """
    spec = config.spec
    seeds = _seed_streams(config.seed, config.iterations)
    pool = sample(config.dist, config.unlabeled_count, seeds[0])
    model = _initial_model(config, seeds[1])
    records: list[TrajectoryRecord] = []
    N = config.unlabeled_count
    for i in range(config.iterations):
        gamma_hat = _measure_gamma(model, config.dist, config.test_count, seeds[2 + 2 * i])
        if not is_feasible_gamma(gamma_hat, spec.delta_tilde):
            return Trajectory(records=tuple(records), final_model=model,
                              halt_reason="infeasible_gamma")
        pseudo = apply_pseudo_labels(pool, model)
        cap = max_randomized_count(N, gamma_hat, spec.delta_tilde)
        requested = config.m_policy.resolve(cap)
        rng = np.random.default_rng(seeds[3 + 2 * i])
        perm = rng.permutation(N)
        wrong = (pseudo.labels != pseudo.true_labels).astype(np.int64)
        m_used = _largest_feasible_prefix(wrong[perm], spec.delta_tilde, requested)
        if m_used < 1:
            return Trajectory(records=tuple(records), final_model=model, halt_reason="m_zero")
        train = randomize_labels_at(pseudo, perm[:m_used], spec.k, rng)
        next_model = fit(config.learner, train)
        e_clean = empirical_error(next_model, train, Provenance.PSEUDO_CORRECT)
        e_random = empirical_error(next_model, train, Provenance.RANDOMIZED)
        n_clean = int(train.provenance_mask(Provenance.PSEUDO_CORRECT).sum())
        n_wrong = int(train.provenance_mask(Provenance.PSEUDO_WRONG).sum())
        report = ratt_bound_relaxed(
            spec, SplitSpec(m=m_used, n=n_clean),
            EmpiricalErrors(e_clean=e_clean, e_random=e_random),
        )
        records.append(TrajectoryRecord(
            iteration=i, gamma_hat=gamma_hat, m_used=m_used,
            e_clean=e_clean, e_random=e_random,
            bound_empirical=report.total,
            bound_predicted=bound_map(spec, N, gamma_hat),
            feasible=True, n_clean=n_clean, n_wrong=n_wrong,
        ))
        model = next_model
    return Trajectory(records=tuple(records), final_model=model, halt_reason="completed")


# --- CSV serialization -------------------------------------------------------

TRAJECTORY_CSV_HEADER = "i,gamma_hat,m_used,e_clean,e_random,bound_empirical,bound_predicted,feasible"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trajectory_csv(traj: Trajectory) -> str:
    """Fixed-header CSV with one row per recorded iteration."""
    out = io.StringIO()
    out.write(TRAJECTORY_CSV_HEADER + "\n")
    for r in traj.records:
        out.write(",".join(_cell(v) for v in (
            r.iteration, r.gamma_hat, r.m_used, r.e_clean, r.e_random,
            r.bound_empirical, r.bound_predicted, r.feasible,
        )) + "\n")
    return out.getvalue()


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(trajectory_csv(traj))
