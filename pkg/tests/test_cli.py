"""Command-line contract: flags, config schema strictness, exit codes, determinism."""

import json

import pytest

from pseudocert.cli import EXIT_CAMPAIGN_FAIL, EXIT_HALT, EXIT_OK, EXIT_USAGE, main


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_kv(out):
    pairs = {}
    for line in out.splitlines():
        if ":" in line:
            key, _, value = line.partition(":")
            pairs[key.strip()] = value.strip()
    return pairs


BOUND_ARGS = ["bound", "--formula", "relaxed", "--k", "2", "--m", "100", "--n", "1000",
              "--delta", "0.05", "--e-clean", "0", "--e-random", "0.5"]


class TestBound:
    def test_relaxed_example(self, capsys):
        code, out, _ = run_cli(BOUND_ARGS, capsys)
        assert code == EXIT_OK
        values = parse_kv(out)
        assert float(values["total"]) == pytest.approx(1.6746632635223369, rel=1e-12)
        assert float(values["term_random"]) == 0.0
        assert values["vacuous"] == "true"

    def test_full_formula(self, capsys):
        args = BOUND_ARGS.copy()
        args[2] = "full"
        code, out, _ = run_cli(args, capsys)
        assert code == EXIT_OK
        assert float(parse_kv(out)["constant_used"]) == pytest.approx(5.4849242404917495)

    def test_ratio_precondition_exits_2(self, capsys):
        args = BOUND_ARGS.copy()
        args[args.index("--n") + 1] = "50"
        code, _, err = run_cli(args, capsys)
        assert code == EXIT_USAGE
        assert "m/n < 1" in err

    def test_malformed_flags_exit_2(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["bound", "--formula", "relaxed", "--k", "two"])
        assert excinfo.value.code == 2


class TestComplexity:
    BASE = ["complexity", "--k", "2", "--delta", "0.05", "--epsilon", "0.0",
            "--delta-tilde", "0.2", "--p", "0.5", "--c1", "0.01", "--c2", "0.1"]

    def test_explicit_ceiling(self, capsys):
        code, out, _ = run_cli(self.BASE + ["--e-d-star", "0.05"], capsys)
        assert code == EXIT_OK
        assert parse_kv(out)["min_unlabeled"] == "246956030"

    def test_halving_c1_quadruples(self, capsys):
        _, out_base, _ = run_cli(self.BASE + ["--e-d-star", "0.05"], capsys)
        args = self.BASE.copy()
        args[args.index("--c1") + 1] = "0.005"
        _, out_half, _ = run_cli(args + ["--e-d-star", "0.05"], capsys)
        n_base = int(parse_kv(out_base)["min_unlabeled"])
        n_half = int(parse_kv(out_half)["min_unlabeled"])
        assert abs(n_half - 4 * n_base) <= 4  # ceilings differ by < 1 each

    def test_self_consistent(self, capsys):
        args = ["complexity", "--k", "2", "--delta", "0.05", "--epsilon", "0.005",
                "--delta-tilde", "0.2", "--p", "0.5", "--c1", "0.01", "--c2", "0.1"]
        code, out, _ = run_cli(args, capsys)
        assert code == EXIT_OK
        assert parse_kv(out)["min_unlabeled"] == "42680408"

    def test_infeasible_bracket_exits_2(self, capsys):
        code, _, err = run_cli(self.BASE + ["--e-d-star", "0.15"], capsys)
        assert code == EXIT_USAGE
        assert "denominator" in err


def simulate_config(tmp_path, **overrides):
    config = {
        "problem": {"k": 4, "delta": 0.05, "epsilon": 0.01, "delta_tilde": 0.2},
        "learner": {"kind": "oracle", "oracle_epsilon": 0.01, "seed": 5},
        "distribution": {"kind": "simplex", "k": 4, "dim": 4,
                         "separation": 10.0, "spread": 1.0},
        "engine": {"algorithm": "certified", "unlabeled_count": 2_000,
                   "test_count": 1_000, "iterations": 3,
                   "m_policy": {"policy": "max_allowed"},
                   "initial_model": {"oracle_risk": 0.1, "oracle_seed": 11}},
        "seed": 321,
        "output": {"trajectory_csv": str(tmp_path / "traj.csv"),
                   "model_file": str(tmp_path / "model.txt")},
    }
    config.update(overrides)
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(config))
    return path, config


class TestSimulate:
    def test_completed_run(self, tmp_path, capsys):
        path, config = simulate_config(tmp_path)
        code, out, _ = run_cli(["simulate", "--config", str(path)], capsys)
        assert code == EXIT_OK
        assert "halt_reason: completed" in out
        lines = (tmp_path / "traj.csv").read_text().splitlines()
        assert len(lines) == 4  # header + one row per iteration
        assert (tmp_path / "model.txt").exists()
        echo = json.loads((tmp_path / "traj.csv.config.json").read_text())
        assert echo["seed"] == 321
        assert echo["resolved_config"]["engine"]["iterations"] == 3

    def test_reruns_are_byte_identical(self, tmp_path, capsys):
        path, _ = simulate_config(tmp_path)
        run_cli(["simulate", "--config", str(path)], capsys)
        first = (tmp_path / "traj.csv").read_bytes()
        run_cli(["simulate", "--config", str(path)], capsys)
        assert (tmp_path / "traj.csv").read_bytes() == first

    def test_infeasible_start_exits_3_with_empty_records(self, tmp_path, capsys):
        path, config = simulate_config(tmp_path)
        config["engine"]["initial_model"] = {"oracle_risk": 0.25}
        path.write_text(json.dumps(config))
        code, out, _ = run_cli(["simulate", "--config", str(path)], capsys)
        assert code == EXIT_HALT
        assert "infeasible_gamma" in out
        assert len((tmp_path / "traj.csv").read_text().splitlines()) == 1

    def test_unknown_key_rejected(self, tmp_path, capsys):
        path, config = simulate_config(tmp_path)
        config["engine"]["warm_start"] = True
        path.write_text(json.dumps(config))
        code, _, err = run_cli(["simulate", "--config", str(path)], capsys)
        assert code == EXIT_USAGE
        assert "warm_start" in err

    def test_missing_file_exits_2(self, capsys):
        code, _, err = run_cli(["simulate", "--config", "/nonexistent.json"], capsys)
        assert code == EXIT_USAGE
        assert "not found" in err


class TestVerify:
    def test_limit_campaign_passes(self, tmp_path, capsys):
        config = {
            "campaign": "limit",
            "seed": 0,
            "problem": {"k": 2, "delta": 0.05, "epsilon": 0.01, "delta_tilde": 0.2},
            "params": {"gamma0": 0.1,
                       "n_grid": [10**4, 10**6, 10**8, 10**10, 10**12]},
            "report_json": str(tmp_path / "limit.json"),
        }
        path = tmp_path / "v.json"
        path.write_text(json.dumps(config))
        code, out, _ = run_cli(["verify", "--config", str(path)], capsys)
        assert code == EXIT_OK
        payload = json.loads((tmp_path / "limit.json").read_text())
        assert payload["pass"] is True
        assert payload["schema_version"] == 1

    def test_rate_below_threshold_exits_0_with_note(self, tmp_path, capsys):
        config = {
            "campaign": "rate",
            "seed": 1,
            "problem": {"k": 2, "delta": 0.05, "epsilon": 0.005, "delta_tilde": 0.2},
            "convergence": {"p": 0.5, "c1": 0.01, "c2": 0.1},
            "params": {"mode": "bound_map", "unlabeled_count": 100_000},
        }
        path = tmp_path / "v.json"
        path.write_text(json.dumps(config))
        code, out, _ = run_cli(["verify", "--config", str(path)], capsys)
        assert code == EXIT_OK
        assert "no assertion" in out

    def test_audit_campaign(self, tmp_path, capsys):
        config = {
            "campaign": "audit",
            "seed": 2,
            "learner": {"kind": "oracle", "oracle_epsilon": 0.01, "seed": 3},
            "distribution": {"kind": "simplex", "k": 4, "dim": 4},
            "params": {"ratio_grid": [0.1, 0.2], "size": 2_000},
            "report_json": str(tmp_path / "audit.json"),
        }
        path = tmp_path / "v.json"
        path.write_text(json.dumps(config))
        code, _, _ = run_cli(["verify", "--config", str(path)], capsys)
        assert code == EXIT_OK
        assert json.loads((tmp_path / "audit.json").read_text())["pass"] is True

    def test_unknown_campaign_exits_2(self, tmp_path, capsys):
        path = tmp_path / "v.json"
        path.write_text(json.dumps({"campaign": "mystery", "seed": 0}))
        code, _, err = run_cli(["verify", "--config", str(path)], capsys)
        assert code == EXIT_USAGE
        assert "unknown campaign" in err

    def test_unknown_top_level_key_exits_2(self, tmp_path, capsys):
        path = tmp_path / "v.json"
        path.write_text(json.dumps({"campaign": "limit", "seed": 0, "extra": 1}))
        code, _, err = run_cli(["verify", "--config", str(path)], capsys)
        assert code == EXIT_USAGE
        assert "extra" in err

    def test_failing_campaign_exits_1(self, tmp_path, capsys):
        # a limit grid that stops while the ratio is still 6% above 1 cannot
        # meet the default 1e-3 closeness requirement
        config = {
            "campaign": "limit",
            "seed": 4,
            "problem": {"k": 2, "delta": 0.05, "epsilon": 0.01, "delta_tilde": 0.2},
            "params": {"gamma0": 0.1, "n_grid": [10**4, 10**6, 10**8]},
        }
        path = tmp_path / "v.json"
        path.write_text(json.dumps(config))
        code, out, _ = run_cli(["verify", "--config", str(path)], capsys)
        assert code == EXIT_CAMPAIGN_FAIL
        assert "FAIL" in out
