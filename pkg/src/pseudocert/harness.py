"""Statistical verification campaigns over the bounds, learners, and engine.

Four campaigns turn the certified-iteration theory into pass/fail reports:

* coverage — does the measured true risk stay below the computed bound in at
  least a 1 - delta share of independent trials?
* audit — does a learner actually separate noise (low error on correctly
  labeled data, near-chance agreement with randomized labels), and in what
  (epsilon, delta_tilde) region? Also checks the overfitting direction on
  mislabeled data (training error not above the fresh-sample error, within
  tolerance).
* limit — does the one-pass bound approach the supervised ceiling from above
  as the unlabeled count grows?
* rate — do the per-iteration contraction ratios stay at or below the target
  p once the unlabeled count clears the self-consistent threshold? The
  guarantee is one-sided: below the threshold the run is reported, never
  failed.

All statistical pass tolerances are 3 binomial standard errors; "true risk"
means the 0-1 error on a fresh sample (10^5 points by default). Trials are
independent work items: each derives its own seed from the campaign seed via
``SeedSequence(campaign_seed, spawn_key=(trial,))``, so results are
identical at any parallelism degree. Reports serialize to JSON with a
``schema_version`` field and embed their configuration, seed, and the
package version.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from . import __version__ as _package_version
from .bounds import (
    ConvergenceSpec,
    EmpiricalErrors,
    FeasibilityError,
    ProblemSpec,
    bound_map,
    is_feasible_gamma,
    iterate_bound_map,
    min_unlabeled_self_consistent,
    optimal_split,
    ratt_bound_relaxed,
    supervised_ceiling,
)
from .datagen import DataDistribution, Provenance, mislabel, randomize_labels, sample
from .engine import EngineConfig, MaxAllowed, run_certified
from .learners import LearnerConfig, empirical_error, fit, oracle_model

__all__ = [
    "SIGMA_RULE",
    "SCHEMA_VERSION",
    "CoverageReport",
    "AuditCell",
    "MislabelAudit",
    "AuditReport",
    "LimitReport",
    "RateReport",
    "coverage_experiment",
    "separation_audit",
    "limit_curve",
    "rate_experiment",
    "write_report",
]

SIGMA_RULE = 3.0  # uniform pre-registered tolerance: 3 binomial standard errors
SCHEMA_VERSION = 1
DEFAULT_FRESH_RISK_SAMPLES = 100_000


def _binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def _trial_seeds(campaign_seed: int, trial: int, count: int) -> list[int]:
    ss = np.random.SeedSequence(campaign_seed, spawn_key=(trial,))
    return [int(s) for s in ss.generate_state(count, dtype=np.uint64)]


def _report_dict(kind: str, body: dict, config: dict, seed: int) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "package_version": _package_version,
        "report": kind,
        "config": config,
        "seed": seed,
        **body,
    }


class _ReportBase:
    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def write_report(report: "_ReportBase", path) -> None:
    """Write a campaign report as JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")


# --- coverage ----------------------------------------------------------------

@dataclass(frozen=True)
class CoverageReport(_ReportBase):
    """Share of trials whose measured true risk stayed below the computed bound."""

    trials: int
    violations: int
    coverage: float
    target: float
    tolerance: float
    passed: bool
    delta: float
    mean_bound: float
    mean_risk: float
    config: dict
    seed: int

    def to_dict(self) -> dict:
        return _report_dict("coverage", {
            "trials": self.trials,
            "violations": self.violations,
            "coverage": self.coverage,
            "target": self.target,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "mean_bound": self.mean_bound,
            "mean_risk": self.mean_risk,
        }, self.config, self.seed)

    def summary(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"coverage {self.coverage:.4f} (target {self.target:.4f} - "
                f"{self.tolerance:.4f}) over {self.trials} trials, "
                f"{self.violations} violations -> {flag}")


def _coverage_trial(spec: ProblemSpec, learner: LearnerConfig, dist: DataDistribution,
                    N: int, fresh_risk_samples: int, campaign_seed: int,
                    trial: int) -> tuple[float, float]:
    data_seed, corrupt_seed, learner_seed, risk_seed = _trial_seeds(campaign_seed, trial, 4)
    split = optimal_split(N, spec.delta_tilde)
    data = sample(dist, N, data_seed)
    corrupted = randomize_labels(data, split.m, dist.k, corrupt_seed)
    model = fit(dataclasses.replace(learner, seed=learner_seed), corrupted)
    err = EmpiricalErrors(
        e_clean=empirical_error(model, corrupted, Provenance.CLEAN),
        e_random=empirical_error(model, corrupted, Provenance.RANDOMIZED),
    )
    bound = ratt_bound_relaxed(spec, split, err).total
    fresh = sample(dist, fresh_risk_samples, risk_seed)
    risk = float(np.mean(model.predict(fresh.features) != fresh.true_labels))
    return bound, risk


def coverage_experiment(
    spec: ProblemSpec,
    learner: LearnerConfig,
    dist: DataDistribution,
    N: int,
    trials: int,
    seed: int,
    fresh_risk_samples: int = DEFAULT_FRESH_RISK_SAMPLES,
    n_jobs: int = 1,
) -> CoverageReport:
    """Repeatedly corrupt-at-the-optimal-split, fit, bound, and check the true risk.

    One violation = a trial whose fresh-sample risk exceeded its bound. The
    campaign passes when coverage >= (1 - delta) - 3*sqrt(delta(1-delta)/trials).
    """
    if trials < 100:
        raise ValueError("need at least 100 trials for a meaningful coverage estimate")
    optimal_split(N, spec.delta_tilde)  # fail fast if the split is infeasible
    if n_jobs == 1:
        results = [
            _coverage_trial(spec, learner, dist, N, fresh_risk_samples, seed, t)
            for t in range(trials)
        ]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_coverage_trial)(spec, learner, dist, N, fresh_risk_samples, seed, t)
            for t in range(trials)
        )
    bounds_arr = np.array([b for b, _ in results])
    risks = np.array([r for _, r in results])
    violations = int(np.sum(risks > bounds_arr))
    coverage = 1.0 - violations / trials
    target = 1.0 - spec.delta
    tolerance = SIGMA_RULE * _binomial_se(spec.delta, trials)
    config = {
        "spec": dataclasses.asdict(spec),
        "learner": dataclasses.asdict(learner),
        "distribution": dist.distribution_id,
        "unlabeled_count": N,
        "trials": trials,
        "fresh_risk_samples": fresh_risk_samples,
    }
    return CoverageReport(
        trials=trials, violations=violations, coverage=coverage,
        target=target, tolerance=tolerance,
        passed=coverage >= target - tolerance,
        delta=spec.delta,
        mean_bound=float(bounds_arr.mean()), mean_risk=float(risks.mean()),
        config=config, seed=seed,
    )


# --- noise-separation audit --------------------------------------------------

@dataclass(frozen=True)
class AuditCell:
    """One tested noise ratio: measured errors with standard errors."""

    ratio: float
    m: int
    n: int
    e_clean: float | None
    se_clean: float | None
    e_random: float | None
    se_random: float | None
    skipped: bool
    epsilon_min: float | None  # smallest fit error consistent with this cell at 3 sigma


@dataclass(frozen=True)
class MislabelAudit:
    """Overfitting-direction check on purely wrong labels.

    The training error on the mislabeled subset should not exceed the error
    on a fresh mislabeled sample by more than the 3-sigma tolerance.
    """

    m: int
    train_error: float
    fresh_error: float
    margin: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class AuditReport(_ReportBase):
    """Noise-ratio grid measurements and the inferred (epsilon, delta_tilde) frontier."""

    cells: tuple[AuditCell, ...]
    frontier_epsilon: float | None
    frontier_delta_tilde: float | None
    mislabel_audit: MislabelAudit | None
    vacuous_ceiling: float  # 1 - 1/k; epsilon at or above this certifies nothing
    passed: bool
    config: dict
    seed: int

    def to_dict(self) -> dict:
        return _report_dict("audit", {
            "cells": [dataclasses.asdict(c) for c in self.cells],
            "frontier_epsilon": self.frontier_epsilon,
            "frontier_delta_tilde": self.frontier_delta_tilde,
            "mislabel_audit": dataclasses.asdict(self.mislabel_audit) if self.mislabel_audit else None,
            "vacuous_ceiling": self.vacuous_ceiling,
            "pass": self.passed,
        }, self.config, self.seed)

    def summary(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        lines = [f"{'ratio':>8} {'m':>7} {'e_clean':>10} {'e_random':>10} {'eps_min':>10}"]
        for c in self.cells:
            if c.skipped:
                lines.append(f"{c.ratio:>8.3g} {'-':>7} {'skipped':>10}")
            else:
                lines.append(f"{c.ratio:>8.3g} {c.m:>7} {c.e_clean:>10.4f} "
                             f"{c.e_random:>10.4f} {c.epsilon_min:>10.4f}")
        lines.append(
            f"frontier: epsilon <= {self.frontier_epsilon}, "
            f"delta_tilde <= {self.frontier_delta_tilde} -> {flag}"
        )
        return "\n".join(lines)


def separation_audit(
    learner: LearnerConfig,
    dist: DataDistribution,
    ratio_grid: Sequence[float],
    size: int,
    seed: int,
) -> AuditReport:
    """Measure a learner's clean/randomized training errors across noise ratios.

    Each cell trains on ``size`` clean examples plus floor(ratio * size)
    randomized ones and measures the two training errors with binomial
    standard errors. A cell's ``epsilon_min`` is the smallest fit error that
    makes both separation inequalities (clean error <= epsilon and
    randomized error >= 1 - 1/k - epsilon) hold with 3-sigma slack; the
    reported frontier is the maximum over the grid, paired with the largest
    tested ratio. A zero-ratio cell is skipped with a flag. The report also
    carries the mislabeled-data overfitting-direction audit, run at the
    largest grid ratio.
    """
    ratios = [float(r) for r in ratio_grid]
    if not ratios or any(not 0.0 <= r < 1.0 for r in ratios):
        raise ValueError("ratio_grid must be nonempty with ratios in [0, 1)")
    if size < 1_000:
        raise ValueError("size must be >= 10^3 so cell error bars are meaningful")
    k = dist.k
    cells: list[AuditCell] = []
    for idx, r in enumerate(ratios):
        m = math.floor(r * size)
        if m == 0:
            cells.append(AuditCell(ratio=r, m=0, n=size, e_clean=None, se_clean=None,
                                   e_random=None, se_random=None, skipped=True,
                                   epsilon_min=None))
            continue
        data_seed, corrupt_seed, learner_seed = _trial_seeds(seed, idx, 3)
        data = sample(dist, size + m, data_seed)
        corrupted = randomize_labels(data, m, k, corrupt_seed)
        model = fit(dataclasses.replace(learner, seed=learner_seed), corrupted)
        e_clean = empirical_error(model, corrupted, Provenance.CLEAN)
        e_random = empirical_error(model, corrupted, Provenance.RANDOMIZED)
        n_clean = len(corrupted) - m
        se_clean = _binomial_se(e_clean, n_clean)
        se_random = _binomial_se(e_random, m)
        eps_min = max(
            e_clean - SIGMA_RULE * se_clean,
            (1.0 - 1.0 / k - e_random) - SIGMA_RULE * se_random,
            0.0,
        )
        cells.append(AuditCell(ratio=r, m=m, n=n_clean, e_clean=e_clean, se_clean=se_clean,
                               e_random=e_random, se_random=se_random, skipped=False,
                               epsilon_min=eps_min))

    measured = [c for c in cells if not c.skipped]
    vacuous = 1.0 - 1.0 / k
    if measured:
        frontier_eps = max(c.epsilon_min for c in measured)
        frontier_dt = max(c.ratio for c in measured)
    else:
        frontier_eps = frontier_dt = None

    # overfitting direction on purely wrong labels, at the largest tested ratio
    mis_audit = None
    if measured:
        m_mis = math.floor(max(c.ratio for c in measured) * size)
        d_seed, c_seed, l_seed, f_seed = _trial_seeds(seed, len(ratios), 4)
        data = sample(dist, size + m_mis, d_seed)
        corrupted = mislabel(data, m_mis, k, c_seed)
        model = fit(dataclasses.replace(learner, seed=l_seed), corrupted)
        train_err = empirical_error(model, corrupted, Provenance.MISLABELED)
        fresh = mislabel(sample(dist, size, f_seed), size, k, f_seed)
        fresh_err = empirical_error(model, fresh, Provenance.MISLABELED)
        tol = SIGMA_RULE * math.sqrt(
            _binomial_se(train_err, m_mis) ** 2 + _binomial_se(fresh_err, size) ** 2
        )
        mis_audit = MislabelAudit(
            m=m_mis, train_error=train_err, fresh_error=fresh_err,
            margin=fresh_err - train_err, tolerance=tol,
            passed=train_err <= fresh_err + tol,
        )

    passed = bool(
        measured
        and frontier_eps is not None and frontier_eps < vacuous
        and (mis_audit is None or mis_audit.passed)
    )
    config = {
        "learner": dataclasses.asdict(learner),
        "distribution": dist.distribution_id,
        "ratio_grid": ratios,
        "size": size,
    }
    return AuditReport(cells=tuple(cells), frontier_epsilon=frontier_eps,
                       frontier_delta_tilde=frontier_dt, mislabel_audit=mis_audit,
                       vacuous_ceiling=vacuous, passed=passed, config=config, seed=seed)


# --- limit curve ---------------------------------------------------------------

@dataclass(frozen=True)
class LimitReport(_ReportBase):
    """Ratio of the one-pass bound to the supervised ceiling across unlabeled counts."""

    n_grid: tuple[int, ...]
    ratios: tuple[float, ...]
    gamma0: float
    non_increasing: bool
    strictly_decreasing: bool
    final_ratio: float
    final_tolerance: float
    passed: bool
    config: dict
    seed: int

    def to_dict(self) -> dict:
        return _report_dict("limit", {
            "n_grid": list(self.n_grid),
            "ratios": list(self.ratios),
            "gamma0": self.gamma0,
            "non_increasing": self.non_increasing,
            "strictly_decreasing": self.strictly_decreasing,
            "final_ratio": self.final_ratio,
            "final_tolerance": self.final_tolerance,
            "pass": self.passed,
        }, self.config, self.seed)

    def summary(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        pairs = ", ".join(f"N={n:g}: {r:.6f}" for n, r in zip(self.n_grid, self.ratios))
        return f"bound/ceiling ratios [{pairs}] -> {flag}"


def limit_curve(
    spec: ProblemSpec,
    gamma0: float,
    N_grid: Sequence[int],
    final_tol: float = 1e-3,
    seed: int = 0,
) -> LimitReport:
    """Track bound_map(spec, N, gamma0) / supervised_ceiling(spec, N) over N_grid.

    The curve starts above 1 for gamma0 > 0, decreases as N grows, and
    approaches 1; the report passes when it is non-increasing and the final
    ratio is within ``final_tol`` of 1. (gamma0 = 0 gives the constant
    curve 1.)
    """
    grid = [int(n) for n in N_grid]
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("N_grid must be increasing with at least two entries")
    if not is_feasible_gamma(gamma0, spec.delta_tilde):
        raise FeasibilityError(f"gamma0 = {gamma0} is not a feasible risk level",
                               threshold=spec.gamma_threshold)
    ratios = [bound_map(spec, n, gamma0) / supervised_ceiling(spec, n) for n in grid]
    non_increasing = all(b <= a for a, b in zip(ratios, ratios[1:]))
    strictly = all(b < a for a, b in zip(ratios, ratios[1:]))
    final_ratio = ratios[-1]
    passed = non_increasing and final_ratio <= 1.0 + final_tol
    config = {"spec": dataclasses.asdict(spec), "gamma0": gamma0,
              "n_grid": grid, "final_tol": final_tol}
    return LimitReport(n_grid=tuple(grid), ratios=tuple(ratios), gamma0=gamma0,
                       non_increasing=non_increasing, strictly_decreasing=strictly,
                       final_ratio=final_ratio, final_tolerance=final_tol,
                       passed=passed, config=config, seed=seed)


# --- convergence-rate experiment ----------------------------------------------

@dataclass(frozen=True)
class RateReport(_ReportBase):
    """Contraction ratios against the target p inside the sandwich band.

    The guarantee is one-sided: ``asserted`` is set only when N reaches the
    self-consistent threshold, and only asserted runs can fail.
    """

    N: int
    p: float
    n_threshold: int
    e_d_star: float
    gamma_start: float | None
    mode: str
    trajectory: tuple[float, ...]
    ratios: tuple[float, ...]
    in_band_ratios: tuple[float, ...]
    max_in_band_ratio: float | None
    band_entered: bool
    asserted: bool
    passed: bool
    note: str
    config: dict
    seed: int

    def to_dict(self) -> dict:
        return _report_dict("rate", {
            "N": self.N,
            "p": self.p,
            "n_threshold": self.n_threshold,
            "e_d_star": self.e_d_star,
            "gamma_start": self.gamma_start,
            "mode": self.mode,
            "trajectory": list(self.trajectory),
            "ratios": list(self.ratios),
            "in_band_ratios": list(self.in_band_ratios),
            "max_in_band_ratio": self.max_in_band_ratio,
            "band_entered": self.band_entered,
            "asserted": self.asserted,
            "pass": self.passed,
            "note": self.note,
        }, self.config, self.seed)

    def summary(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        head = (f"N={self.N} (threshold {self.n_threshold}), target p={self.p}, "
                f"max in-band ratio {self.max_in_band_ratio}")
        return f"{head}; {self.note or 'asserted'} -> {flag}"


def _gap_ratios(levels: Sequence[float], e_d_star: float, band_lo: float, band_hi: float
                ) -> tuple[list[float], list[float]]:
    # ratios of consecutive positive gaps; the in-band subset keys on the
    # earlier LEVEL lying inside [band_lo, band_hi] (comparing levels, not
    # gaps, keeps the top-of-band starting point in band bit-for-bit)
    ratios, in_band = [], []
    for a, b in zip(levels, levels[1:]):
        if a <= e_d_star or b <= e_d_star:
            continue
        r = (b - e_d_star) / (a - e_d_star)
        ratios.append(r)
        if band_lo <= a <= band_hi:
            in_band.append(r)
    return ratios, in_band


def rate_experiment(
    spec: ProblemSpec,
    conv: ConvergenceSpec,
    N: int,
    mode: str = "bound_map",
    learner: LearnerConfig | None = None,
    dist: DataDistribution | None = None,
    seed: int = 0,
    iterations: int = 12,
    test_count: int = 10_000,
    threshold_cap: int = 10**15,
) -> RateReport:
    """Check the per-iteration contraction rate against its sample-size threshold.

    ``bound_map`` mode iterates the bound map from the top of the band
    (ceiling + c2) and reports the gap-contraction ratios while the iterates
    stay inside the band. ``empirical`` mode runs the certified engine loop
    (starting from an oracle model at the top of the band) and applies the
    same ratio bookkeeping to the measured-error bounds. Runs with N below
    the self-consistent threshold are reported without assertion and never
    fail.
    """
    if mode not in ("bound_map", "empirical"):
        raise ValueError(f"unknown mode {mode!r}; expected 'bound_map' or 'empirical'")
    n_threshold = min_unlabeled_self_consistent(spec, conv, cap=threshold_cap)
    e_d_star = supervised_ceiling(spec, N)
    gamma_start = e_d_star + conv.c2
    asserted = N >= n_threshold
    note = "" if asserted else "below sample-size threshold; no assertion"
    config = {
        "spec": dataclasses.asdict(spec),
        "convergence": dataclasses.asdict(conv),
        "N": N, "mode": mode, "iterations": iterations,
    }

    if mode == "bound_map":
        if not is_feasible_gamma(gamma_start, spec.delta_tilde):
            return RateReport(
                N=N, p=conv.p, n_threshold=n_threshold, e_d_star=e_d_star,
                gamma_start=gamma_start, mode=mode, trajectory=(), ratios=(),
                in_band_ratios=(), max_in_band_ratio=None, band_entered=False,
                asserted=asserted, passed=True,
                note=(note + "; " if note else "") + "band top is an infeasible risk level",
                config=config, seed=seed,
            )
        levels = list(iterate_bound_map(spec, N, gamma_start, iterations).values)
    else:
        if learner is None or dist is None:
            raise ValueError("empirical mode needs a learner config and a data distribution")
        if not is_feasible_gamma(gamma_start, spec.delta_tilde):
            return RateReport(
                N=N, p=conv.p, n_threshold=n_threshold, e_d_star=e_d_star,
                gamma_start=gamma_start, mode=mode, trajectory=(), ratios=(),
                in_band_ratios=(), max_in_band_ratio=None, band_entered=False,
                asserted=asserted, passed=True,
                note=(note + "; " if note else "") + "band top is an infeasible risk level",
                config=config, seed=seed,
            )
        f0 = oracle_model(dist, min(gamma_start, 0.999), seed)
        engine_config = EngineConfig(
            spec=spec, learner=learner, dist=dist, unlabeled_count=N,
            iterations=iterations, test_count=test_count,
            m_policy=MaxAllowed(), initial_model=f0, seed=seed,
        )
        traj = run_certified(engine_config)
        levels = [r.bound_empirical for r in traj.records if r.bound_empirical is not None]

    ratios, in_band = _gap_ratios(levels, e_d_star, e_d_star + conv.c1, gamma_start)
    band_entered = bool(in_band)
    if not band_entered and not note:
        note = "band never entered"
    max_in_band = max(in_band) if in_band else None
    passed = all(r <= conv.p for r in in_band) if asserted else True
    return RateReport(
        N=N, p=conv.p, n_threshold=n_threshold, e_d_star=e_d_star,
        gamma_start=gamma_start, mode=mode,
        trajectory=tuple(levels), ratios=tuple(ratios),
        in_band_ratios=tuple(in_band), max_in_band_ratio=max_in_band,
        band_entered=band_entered, asserted=asserted, passed=passed,
        note=note, config=config, seed=seed,
    )


def default_jobs() -> int:
    """Parallelism default for campaigns: the number of available processors."""
    return os.cpu_count() or 1
