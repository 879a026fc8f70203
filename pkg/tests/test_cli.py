import json
import os

import numpy as np
import pytest

from etconsensus import cli
from etconsensus.config import ConfigError, scenario_from_config
from etconsensus.presets import paper_config


def run_cli(capsys, *argv):
    code = cli.run_command(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


class TestLoadScenario:
    def test_paper_preset_values(self):
        sc = scenario_from_config(paper_config())
        assert sc.n_followers == 8 and sc.m == 3
        assert np.array_equal(sc.gains.a0, [[0.0, 2.0], [-1.5, 0.0]])
        assert np.array_equal(sc.gains.c0, [[1.0, 2.0]])
        assert sc.dt == 1e-3 and sc.seed == 42
        a1 = sc.models[0]
        assert np.array_equal(a1.a, [[1.0, -1.0], [-2.0, 3.0]])
        assert np.array_equal(a1.b, [[2.0, 0.5], [0.5, 1.0]])
        assert np.array_equal(a1.c, [[1.0, 0.0]])

    def test_asymmetric_group_block_rejected(self):
        cfg = paper_config()
        cfg["topology"]["a11"][0][1] = 0.9  # breaks the undirected assumption
        with pytest.raises(ConfigError, match="assumption2"):
            scenario_from_config(cfg)

    def test_missing_dt_defaults_and_echoes(self):
        cfg = paper_config()
        del cfg["dt"]
        cfg["t_end"] = 0.01
        sc = scenario_from_config(cfg)
        assert sc.dt == 1e-3
        assert sc.metadata()["dt"] == 1e-3

    def test_config_file_parse_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError, match="line"):
            cli.load_scenario(type("Args", (), {"config": str(bad)})())


class TestRunCommand:
    def test_run_writes_artifacts_and_is_bit_identical(self, tmp_path, capsys):
        args = ["run", "--preset", "paper", "--seed", "42",
                "--t-end", "0.5", "--out-dir"]
        code1, summary1 = run_cli(capsys, *args, str(tmp_path / "a"))
        code2, summary2 = run_cli(capsys, *args, str(tmp_path / "b"))
        assert code1 == 0 and code2 == 0
        for name in ("states.csv", "observers.csv", "events.csv",
                     "metrics.csv", "run_summary.json", "gains.json"):
            a = (tmp_path / "a" / name).read_bytes()
            b = (tmp_path / "b" / name).read_bytes()
            assert a == b, f"{name} differs between reruns"
        assert summary1["meta"]["gain_hash"] == summary2["meta"]["gain_hash"]

    def test_metadata_supports_reproduction(self, tmp_path, capsys):
        code, summary = run_cli(
            capsys, "run", "--preset", "paper", "--t-end", "0.01",
            "--out-dir", str(tmp_path / "r"))
        meta = summary["meta"]
        for key in ("seed", "prng", "dt", "mode", "gain_hash", "version"):
            assert key in meta

    def test_fault_ablation_flags(self, tmp_path, capsys):
        code, summary = run_cli(
            capsys, "run", "--preset", "paper", "--t-end", "0.01",
            "--no-comm-faults", "--no-actuator-faults",
            "--out-dir", str(tmp_path / "r"))
        assert code == 0
        assert summary["meta"]["comm_faults"] is False
        assert summary["meta"]["actuator_faults"] is False

    def test_unknown_flag_exits_with_usage_error(self):
        with pytest.raises(SystemExit) as err:
            cli.run_command(["run", "--bogus"])
        assert err.value.code == 2


class TestSynthCommand:
    def test_synth_reports_pass(self, tmp_path, capsys):
        code, summary = run_cli(capsys, "synth", "--preset", "paper",
                                "--out-dir", str(tmp_path))
        assert code == 0
        assert summary["passed"] is True
        assert summary["network_margin"] < 0
        report = json.loads((tmp_path / "verification_report.json").read_text())
        assert report["passed"] is True
        gains = json.loads((tmp_path / "gains.json").read_text())
        assert len(gains["agents"]) == 8


class TestAnalyzeCommand:
    def test_analyze_round_trip(self, tmp_path, capsys):
        run_dir = str(tmp_path / "r")
        code, _ = run_cli(capsys, "run", "--preset", "paper",
                          "--t-end", "0.5", "--out-dir", run_dir)
        assert code == 0
        code, report = run_cli(capsys, "analyze", "--run-dir", run_dir)
        # exit-code contract: 0 pass, 1 fail (short horizon may legitimately
        # exceed the tail bounds, so only the contract itself is asserted)
        assert code in (0, 1)
        assert report["passed"] is (code == 0)
        assert os.path.exists(os.path.join(run_dir, "analysis_report.json"))

    def test_analyze_honours_custom_bounds(self, tmp_path, capsys):
        run_dir = str(tmp_path / "r")
        run_cli(capsys, "run", "--preset", "paper", "--t-end", "0.2",
                "--out-dir", run_dir)
        loose = tmp_path / "loose.json"
        loose.write_text(json.dumps(
            {"window_fraction": 0.2, "bounds": {"tracking": 1e6}}))
        code, report = run_cli(capsys, "analyze", "--run-dir", run_dir,
                               "--bounds", str(loose))
        assert code == 0 and report["passed"]


class TestCompareCommand:
    def test_compare_emits_both_modes(self, tmp_path, capsys):
        code, report = run_cli(
            capsys, "compare", "--preset", "paper", "--t-end", "0.5",
            "--kappa", "0.2", "--out-dir", str(tmp_path))
        assert code == 0
        assert report["crm"]["mode"] == "crm"
        assert report["orm"]["mode"] == "orm"
        assert report["ratio_transient"] > 0
        assert (tmp_path / "comparison_report.json").exists()
        assert (tmp_path / "crm" / "states.csv").exists()
        assert (tmp_path / "orm" / "states.csv").exists()


class TestScenarioRoundTrip:
    def test_serialised_scenario_reproduces_gain_hash_and_output(self, tmp_path):
        cfg = paper_config()
        cfg["t_end"] = 0.1
        sc1 = scenario_from_config(cfg)
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(sc1.config))
        sc2 = scenario_from_config(json.loads(path.read_text()))
        assert sc1.gains.gain_hash() == sc2.gains.gain_hash()
        from etconsensus import simulator
        tr1 = simulator.run(sc1)
        tr2 = simulator.run(sc2)
        assert np.array_equal(tr1.x, tr2.x)
        assert tr1.events == tr2.events


class TestSweepCommand:
    def test_sweep_writes_per_seed_dirs(self, tmp_path, capsys):
        code, report = run_cli(
            capsys, "sweep", "--preset", "paper", "--seeds", "1,2",
            "--out-dir", str(tmp_path))
        assert code == 0
        assert len(report["runs"]) == 2
        assert (tmp_path / "seed1" / "run_summary.json").exists()
        assert (tmp_path / "seed2" / "run_summary.json").exists()
