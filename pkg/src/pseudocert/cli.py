"""Command-line front end: bound calculators, simulation runs, verification campaigns.

Subcommands:

* ``bound``      evaluate a risk bound from empirical errors and split sizes
* ``complexity`` unlabeled-sample-size threshold for a target contraction rate
* ``simulate``   run a self-training loop from a JSON config; writes a
                 trajectory CSV, the final model, and a resolved-config echo
* ``verify``     run a verification campaign from a JSON config; writes a
                 JSON report

Exit codes: 0 success (or campaign pass), 1 campaign fail, 2 usage or config
error, 3 algorithmic halt (the feasibility gate or an empty admissible
subset stopped a simulation — correct behavior, distinct from a crash).

Config files are flat JSON with a strict schema: any unknown key aborts
before computation. Seeds are accepted as unsigned 64-bit integers.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .bounds import (
    ConvergenceSpec,
    EmpiricalErrors,
    FeasibilityError,
    ProblemSpec,
    SplitSpec,
    min_unlabeled_for_rate,
    min_unlabeled_self_consistent,
    ratt_bound_full,
    ratt_bound_relaxed,
)
from .datagen import DataDistribution, simplex_mixture
from .engine import (
    EngineConfig,
    FixedCount,
    FractionOfMax,
    MaxAllowed,
    run_certified,
    run_plain,
    write_trajectory_csv,
)
from .harness import (
    coverage_experiment,
    default_jobs,
    limit_curve,
    rate_experiment,
    separation_audit,
    write_report,
)
from .learners import LearnerConfig, TrainingError, load_model, oracle_model, save_model

EXIT_OK = 0
EXIT_CAMPAIGN_FAIL = 1
EXIT_USAGE = 2
EXIT_HALT = 3


class ConfigError(ValueError):
    """A config file violates the documented schema."""


def _check_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"missing key(s) in {where}: {', '.join(sorted(missing))}")


def _build_problem(d: dict) -> ProblemSpec:
    _check_keys(d, {"k", "delta", "epsilon", "delta_tilde"},
                {"k", "delta", "epsilon", "delta_tilde"}, "problem")
    return ProblemSpec(k=int(d["k"]), delta=float(d["delta"]),
                       epsilon=float(d["epsilon"]), delta_tilde=float(d["delta_tilde"]))


def _build_learner(d: dict) -> LearnerConfig:
    _check_keys(d, {"kind", "oracle_epsilon", "gd_steps", "gd_learning_rate", "gd_l2", "seed"},
                {"kind"}, "learner")
    kwargs = {k: d[k] for k in d if k != "kind"}
    return LearnerConfig(kind=d["kind"], **kwargs)


def _build_distribution(d: dict) -> DataDistribution:
    kind = d.get("kind")
    if kind == "simplex":
        _check_keys(d, {"kind", "k", "dim", "separation", "spread", "priors"},
                    {"kind", "k", "dim"}, "distribution")
        return simplex_mixture(k=int(d["k"]), dim=int(d["dim"]),
                               separation=float(d.get("separation", 10.0)),
                               spread=float(d.get("spread", 1.0)),
                               priors=d.get("priors"))
    if kind == "explicit":
        _check_keys(d, {"kind", "centers", "spread", "priors"},
                    {"kind", "centers", "spread", "priors"}, "distribution")
        centers = np.asarray(d["centers"], dtype=float)
        return DataDistribution(k=centers.shape[0], dim=centers.shape[1],
                                class_centers=centers,
                                class_spread=np.asarray(d["spread"], dtype=float),
                                class_priors=np.asarray(d["priors"], dtype=float))
    raise ConfigError("distribution.kind must be 'simplex' or 'explicit'")


def _build_m_policy(d: dict):
    _check_keys(d, {"policy", "m", "fraction"}, {"policy"}, "engine.m_policy")
    policy = d["policy"]
    if policy == "max_allowed":
        return MaxAllowed()
    if policy == "fixed":
        if "m" not in d:
            raise ConfigError("m_policy 'fixed' needs key 'm'")
        return FixedCount(m=int(d["m"]))
    if policy == "fraction":
        if "fraction" not in d:
            raise ConfigError("m_policy 'fraction' needs key 'fraction'")
        return FractionOfMax(fraction=float(d["fraction"]))
    raise ConfigError(f"unknown m_policy {policy!r}")


def _build_initial_model(d: dict, dist: DataDistribution):
    _check_keys(d, {"bootstrap_size", "oracle_risk", "oracle_seed", "model_file"},
                set(), "engine.initial_model")
    given = [k for k in ("bootstrap_size", "oracle_risk", "model_file") if k in d]
    if len(given) != 1:
        raise ConfigError(
            "engine.initial_model must set exactly one of bootstrap_size, oracle_risk, model_file"
        )
    if "bootstrap_size" in d:
        return int(d["bootstrap_size"])
    if "oracle_risk" in d:
        return oracle_model(dist, float(d["oracle_risk"]), int(d.get("oracle_seed", 0)))
    return load_model(d["model_file"])


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")


def _print_bound(report) -> None:
    print(f"formula:            {report.formula_id}")
    print(f"term_clean:         {report.term_clean!r}")
    print(f"term_random:        {report.term_random!r}")
    print(f"term_concentration: {report.term_concentration!r}")
    print(f"constant_used:      {report.constant_used!r}")
    print(f"total:              {report.total!r}")
    print(f"vacuous:            {'true' if report.vacuous else 'false'}")


def cmd_bound(args) -> int:
    spec = ProblemSpec(k=args.k, delta=args.delta,
                       epsilon=args.epsilon, delta_tilde=args.delta_tilde)
    split = SplitSpec(m=args.m, n=args.n)
    err = EmpiricalErrors(e_clean=args.e_clean, e_random=args.e_random)
    if args.formula == "full":
        report = ratt_bound_full(spec, split, err)
    else:
        report = ratt_bound_relaxed(spec, split, err)
    _print_bound(report)
    return EXIT_OK


def cmd_complexity(args) -> int:
    spec = ProblemSpec(k=args.k, delta=args.delta,
                       epsilon=args.epsilon, delta_tilde=args.delta_tilde)
    conv = ConvergenceSpec(p=args.p, c1=args.c1, c2=args.c2)
    print(f"k={spec.k} delta={spec.delta} epsilon={spec.epsilon} "
          f"delta_tilde={spec.delta_tilde} p={conv.p} c1={conv.c1} c2={conv.c2}")
    if args.e_d_star is not None:
        n = min_unlabeled_for_rate(spec, conv, args.e_d_star)
        print(f"e_d_star={args.e_d_star} (explicit)")
    else:
        n = min_unlabeled_self_consistent(spec, conv, cap=args.cap)
        print("e_d_star=self-consistent (evaluated at the solution's own ceiling)")
    print(f"min_unlabeled: {n}")
    return EXIT_OK


_SIMULATE_KEYS = {"problem", "learner", "distribution", "engine", "seed", "output"}
_ENGINE_KEYS = {"algorithm", "unlabeled_count", "test_count", "iterations",
                "m_policy", "initial_model"}


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    _check_keys(config, _SIMULATE_KEYS, _SIMULATE_KEYS - {"output"}, "config")
    spec = _build_problem(config["problem"])
    learner = _build_learner(config["learner"])
    dist = _build_distribution(config["distribution"])
    eng = config["engine"]
    _check_keys(eng, _ENGINE_KEYS, {"algorithm", "unlabeled_count", "iterations"}, "engine")
    algorithm = eng["algorithm"]
    if algorithm not in ("plain", "certified"):
        raise ConfigError("engine.algorithm must be 'plain' or 'certified'")
    engine_config = EngineConfig(
        spec=spec, learner=learner, dist=dist,
        unlabeled_count=int(eng["unlabeled_count"]),
        iterations=int(eng["iterations"]),
        test_count=int(eng.get("test_count", 10_000)),
        m_policy=_build_m_policy(eng.get("m_policy", {"policy": "max_allowed"})),
        initial_model=_build_initial_model(eng.get("initial_model", {"bootstrap_size": 500}), dist),
        seed=int(config["seed"]),
    )
    traj = run_plain(engine_config) if algorithm == "plain" else run_certified(engine_config)

    output = config.get("output", {})
    _check_keys(output, {"trajectory_csv", "model_file"}, set(), "output")
    csv_path = output.get("trajectory_csv", "trajectory.csv")
    write_trajectory_csv(traj, csv_path)
    if "model_file" in output:
        save_model(traj.final_model, output["model_file"])
    echo_path = Path(csv_path).with_suffix(Path(csv_path).suffix + ".config.json")
    with open(echo_path, "w", encoding="utf-8") as fh:
        json.dump({"resolved_config": config, "seed": config["seed"]},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"halt_reason: {traj.halt_reason}")
    print(f"records: {len(traj.records)}")
    print(f"trajectory_csv: {csv_path}")
    return EXIT_OK if traj.halt_reason == "completed" else EXIT_HALT


_VERIFY_KEYS = {"campaign", "seed", "report_json", "jobs",
                "problem", "learner", "distribution", "convergence", "params"}


def _build_convergence(d: dict) -> ConvergenceSpec:
    _check_keys(d, {"p", "c1", "c2"}, {"p", "c1", "c2"}, "convergence")
    return ConvergenceSpec(p=float(d["p"]), c1=float(d["c1"]), c2=float(d["c2"]))


def cmd_verify(args) -> int:
    config = _load_config(args.config)
    _check_keys(config, _VERIFY_KEYS, {"campaign", "seed"}, "config")
    campaign = config["campaign"]
    seed = int(config["seed"])
    params = config.get("params", {})

    if campaign == "coverage":
        _check_keys(params, {"unlabeled_count", "trials", "fresh_risk_samples"},
                    {"unlabeled_count", "trials"}, "params")
        jobs = int(config.get("jobs", 0)) or default_jobs()
        report = coverage_experiment(
            spec=_build_problem(config["problem"]),
            learner=_build_learner(config["learner"]),
            dist=_build_distribution(config["distribution"]),
            N=int(params["unlabeled_count"]),
            trials=int(params["trials"]),
            seed=seed,
            fresh_risk_samples=int(params.get("fresh_risk_samples", 100_000)),
            n_jobs=jobs,
        )
    elif campaign == "audit":
        _check_keys(params, {"ratio_grid", "size"}, {"ratio_grid", "size"}, "params")
        report = separation_audit(
            learner=_build_learner(config["learner"]),
            dist=_build_distribution(config["distribution"]),
            ratio_grid=[float(r) for r in params["ratio_grid"]],
            size=int(params["size"]),
            seed=seed,
        )
    elif campaign == "limit":
        _check_keys(params, {"gamma0", "n_grid", "final_tol"}, {"gamma0", "n_grid"}, "params")
        report = limit_curve(
            spec=_build_problem(config["problem"]),
            gamma0=float(params["gamma0"]),
            N_grid=[int(n) for n in params["n_grid"]],
            final_tol=float(params.get("final_tol", 1e-3)),
            seed=seed,
        )
    elif campaign == "rate":
        _check_keys(params, {"mode", "unlabeled_count", "iterations", "test_count"},
                    {"mode", "unlabeled_count"}, "params")
        mode = params["mode"]
        learner = _build_learner(config["learner"]) if "learner" in config else None
        dist = _build_distribution(config["distribution"]) if "distribution" in config else None
        report = rate_experiment(
            spec=_build_problem(config["problem"]),
            conv=_build_convergence(config["convergence"]),
            N=int(params["unlabeled_count"]),
            mode=mode, learner=learner, dist=dist, seed=seed,
            iterations=int(params.get("iterations", 12)),
            test_count=int(params.get("test_count", 10_000)),
        )
    else:
        raise ConfigError(f"unknown campaign {campaign!r}; "
                          "expected coverage, audit, limit, or rate")

    if "report_json" in config:
        write_report(report, config["report_json"])
        print(f"report_json: {config['report_json']}")
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_CAMPAIGN_FAIL


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pseudocert",
        description="Risk-bound calculators and verification campaigns "
                    "for certified pseudo-label self-training.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", help="evaluate a risk bound from empirical errors")
    b.add_argument("--formula", choices=("full", "relaxed"), required=True,
                   help="full: split-dependent constant over sqrt(2m); "
                        "relaxed: flat 4k constant over sqrt(m), needs m/n < 1")
    b.add_argument("--k", type=int, required=True, help="class count")
    b.add_argument("--m", type=int, required=True, help="randomized-subset size")
    b.add_argument("--n", type=int, required=True, help="clean-subset size")
    b.add_argument("--delta", type=float, required=True, help="confidence parameter")
    b.add_argument("--e-clean", type=float, required=True, dest="e_clean",
                   help="empirical error on the clean subset")
    b.add_argument("--e-random", type=float, required=True, dest="e_random",
                   help="empirical error on the randomized subset")
    b.add_argument("--epsilon", type=float, default=0.0,
                   help="fit-error parameter (echoed only; does not enter these formulas)")
    b.add_argument("--delta-tilde", type=float, default=0.5, dest="delta_tilde",
                   help="noise-ratio ceiling (echoed only; does not enter these formulas)")
    b.set_defaults(func=cmd_bound)

    c = sub.add_parser("complexity", help="unlabeled count needed for a contraction rate")
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--delta", type=float, required=True)
    c.add_argument("--epsilon", type=float, required=True)
    c.add_argument("--delta-tilde", type=float, required=True, dest="delta_tilde")
    c.add_argument("--p", type=float, required=True, help="target contraction rate")
    c.add_argument("--c1", type=float, required=True, help="lower band offset")
    c.add_argument("--c2", type=float, required=True, help="upper band offset")
    c.add_argument("--e-d-star", type=float, default=None, dest="e_d_star",
                   help="explicit ceiling; omit to solve self-consistently")
    c.add_argument("--cap", type=int, default=10**15,
                   help="search cap for the self-consistent solve")
    c.set_defaults(func=cmd_complexity)

    s = sub.add_parser("simulate", help="run a self-training loop from a JSON config")
    s.add_argument("--config", required=True, help="path to the run config")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="run a verification campaign from a JSON config")
    v.add_argument("--config", required=True, help="path to the campaign config")
    v.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FeasibilityError, TrainingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
