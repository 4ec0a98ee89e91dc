import dataclasses
import json
import os

import jsonschema
import numpy as np
import pytest

from overfactor import GdConfig
from overfactor.cli import main as cli_main
from overfactor.cli import parse_value, read_config_file
from overfactor.experiments import (
    COMPLETION,
    SENSING,
    ExperimentGrid,
    OverfitDemoConfig,
    ScalingConfig,
    run_cell,
    run_grid,
    run_overfit_demo,
    run_rip_probe,
    run_scaling_study,
    run_trial,
    trial_seed,
)
from overfactor.report import validate_report

FAST_GD = GdConfig(r=12, eta=0.5, alpha=1e-4, T=60)

FAST_GRID = ExperimentGrid(
    problem=SENSING,
    n=12,
    m=150,
    m_val=30,
    rank_values=(1, 3),
    sigma2_values=(0.05, 0.2),
    trials=2,
    gd=FAST_GD,
    base_seed=42,
)


class TestRunCell:
    def test_determinism(self):
        a = run_cell(FAST_GRID, 3, 0.2, trial=0)
        b = run_cell(FAST_GRID, 3, 0.2, trial=0)
        assert a == b

    def test_outside_grid_rejected(self):
        with pytest.raises(ValueError):
            run_cell(FAST_GRID, 7, 0.2, trial=0)

    def test_noiseless_limit(self):
        # sigma^2 = 0: no overfitting, selection lands late and error is tiny.
        grid = dataclasses.replace(FAST_GRID, sigma2_values=(0.0,),
                                   gd=dataclasses.replace(FAST_GD, T=200, alpha=1e-6))
        res = run_cell(grid, 1, 0.0, trial=0)
        assert res.t_hat >= 0.5 * grid.gd.T
        assert res.err_hat <= 1e-3

    def test_trial_fields(self):
        res = run_cell(FAST_GRID, 1, 0.05, trial=1)
        assert not res.diverged
        assert res.err_hat >= res.err_tilde
        assert res.gap == pytest.approx(res.err_hat - res.err_tilde)
        assert res.seed == trial_seed(42, SENSING, 1, 0.05, 1)

    def test_replay_from_recorded_seed(self):
        res = run_cell(FAST_GRID, 3, 0.05, trial=1)
        replay = run_trial(SENSING, FAST_GRID.n, FAST_GRID.m, FAST_GRID.m_val,
                           3, 0.05, FAST_GRID.gd, res.seed, trial=1)
        assert replay == res


class TestRunGrid:
    @pytest.fixture(scope="class")
    @staticmethod
    def grid_run(tmp_path_factory):
        out = tmp_path_factory.mktemp("grid")
        report = run_grid(FAST_GRID, out, workers=1, spearman_threshold=-1.0)
        return report, out

    def test_artifacts_written(self, grid_run):
        report, out = grid_run
        for name in ("trials.csv", "heatmap_oracle.csv", "heatmap_selected.csv",
                     "heatmap_oracle.png", "heatmap_selected.png",
                     "config.txt", "report.json"):
            assert (out / name).exists()

    def test_report_schema(self, grid_run):
        report, out = grid_run
        validate_report(report)
        on_disk = json.loads((out / "report.json").read_text())
        validate_report(on_disk)
        assert on_disk["kind"] == "grid"

    def test_cells_and_ordering(self, grid_run):
        report, _ = grid_run
        cells = report["results"]["cells"]
        assert len(cells) == 4
        assert all(c["mean_err_hat"] >= c["mean_err_tilde"] for c in cells)

    def test_trial_rows_replayable(self, grid_run):
        import csv as csvmod

        report, out = grid_run
        with open(out / "trials.csv") as fh:
            rows = list(csvmod.DictReader(fh))
        assert len(rows) == 8
        row = rows[3]
        replay = run_trial(row["problem"], FAST_GRID.n, FAST_GRID.m, FAST_GRID.m_val,
                           int(row["r_star"]), float(row["sigma2"]), FAST_GRID.gd,
                           int(row["seed"]), trial=int(row["trial"]))
        assert replay.err_hat == pytest.approx(float(row["err_hat"]), rel=1e-15)

    def test_single_cell_grid(self, tmp_path):
        grid = dataclasses.replace(FAST_GRID, rank_values=(2,), sigma2_values=(0.1,), trials=1)
        report = run_grid(grid, tmp_path, workers=1)
        assert len(report["results"]["cells"]) == 1
        assert report["results"]["spearman_vs_rank"] == []
        assert report["results"]["spearman_vs_sigma2"] == []

    def test_completion_problem_runs(self, tmp_path):
        grid = ExperimentGrid(
            problem=COMPLETION, n=12, m=100, m_val=20,
            rank_values=(1, 2), sigma2_values=(1e-5, 1e-4), trials=1,
            gd=GdConfig(r=12, eta=0.5, alpha=1e-3, T=80), base_seed=3,
        )
        report = run_grid(grid, tmp_path, workers=1, spearman_threshold=-1.0)
        cells = report["results"]["cells"]
        assert all(np.isfinite(c["mean_err_hat"]) for c in cells)

    def test_parallel_workers_identical_report(self, tmp_path):
        a = run_grid(FAST_GRID, tmp_path / "w1", workers=1, spearman_threshold=-1.0)
        b = run_grid(FAST_GRID, tmp_path / "w2", workers=2, spearman_threshold=-1.0)
        assert a["results"]["cells"] == b["results"]["cells"]
        assert (tmp_path / "w1" / "trials.csv").read_text() == \
               (tmp_path / "w2" / "trials.csv").read_text()

    def test_diverged_trials_flagged_and_excluded(self):
        from overfactor.experiments import TrialResult, _aggregate_cell

        ok = TrialResult(problem=SENSING, r_star=2, sigma2=0.1, trial=0, seed=1,
                         err_tilde=0.1, err_hat=0.2, gap=0.1, t_tilde=3, t_hat=4)
        bad = TrialResult(problem=SENSING, r_star=2, sigma2=0.1, trial=1, seed=2,
                          diverged=True)
        cell = _aggregate_cell(2, 0.1, [ok, bad])
        assert cell.flagged_trials == (1,)
        assert cell.mean_err_hat == pytest.approx(0.2)
        assert cell.mean_err_tilde == pytest.approx(0.1)


class TestOverfitDemo:
    @pytest.fixture(scope="class")
    @staticmethod
    def demo_run(tmp_path_factory):
        out = tmp_path_factory.mktemp("demo")
        config = OverfitDemoConfig(
            n=16, r_star=2, m=200, m_val=40, sigma=0.4,
            gd=GdConfig(r=16, eta=0.5, alpha=1e-5, T=150), base_seed=1,
        )
        return run_overfit_demo(config, out), out

    def test_signature_assertions_present(self, demo_run):
        report, _ = demo_run
        names = {a["name"] for a in report["assertions"]}
        assert names == {"recovery-argmin-interior", "final-error-rises",
                         "selected-near-valley", "selected-ratio"}

    def test_selection_serialized(self, demo_run):
        report, out = demo_run
        sel = report["selection"]
        assert isinstance(sel["t_hat"], int)
        assert isinstance(sel["t_tilde"], int)
        assert sel["gap"] >= 0
        assert (out / sel["val_curve"]).exists()
        assert (out / "curves.png").exists()

    def test_noiseless_assertions_switched_off(self, tmp_path):
        config = OverfitDemoConfig(
            n=12, r_star=2, m=120, m_val=20, sigma=0.0,
            gd=GdConfig(r=12, eta=0.5, alpha=1e-5, T=80), base_seed=1,
        )
        report = run_overfit_demo(config, tmp_path)
        assert report["assertions"] == []

    def test_replay_identical_curves(self, tmp_path, demo_run):
        report, out = demo_run
        config = OverfitDemoConfig(
            n=16, r_star=2, m=200, m_val=40, sigma=0.4,
            gd=GdConfig(r=16, eta=0.5, alpha=1e-5, T=150), base_seed=1,
        )
        replay = run_overfit_demo(config, tmp_path)
        assert (tmp_path / "trajectory.csv").read_text() == (out / "trajectory.csv").read_text()

    def test_csv_carries_phase_columns_and_descent(self, demo_run):
        import csv as csvmod

        report, out = demo_run
        with open(out / "trajectory.csv") as fh:
            rows = list(csvmod.DictReader(fh))
        assert rows[0]["sigma_min_signal"] != ""
        assert rows[0]["err_norm"] != ""
        assert rows[0]["alignment"] != ""
        # Descent sanity: final train loss no larger than the initial one.
        assert float(rows[-1]["train_loss"]) <= float(rows[0]["train_loss"])


class TestScalingStudy:
    def test_insufficient_points(self, tmp_path):
        config = ScalingConfig(axis="sigma2", values=(0.1, 0.2), trials=10)
        with pytest.raises(ValueError):
            run_scaling_study(config, tmp_path)

    def test_insufficient_trials(self, tmp_path):
        config = ScalingConfig(axis="sigma2", values=(0.1, 0.2, 0.4, 0.8), trials=2)
        with pytest.raises(ValueError):
            run_scaling_study(config, tmp_path)

    def test_defaults(self):
        config = ScalingConfig.with_defaults("m")
        assert config.values == (500, 1000, 2000, 4000)
        assert config.expected_slope == -1.0
        assert config.r_star == 2

    def test_small_sweep_report(self, tmp_path):
        config = ScalingConfig(
            axis="sigma2", values=(0.05, 0.1, 0.2, 0.4), trials=10,
            n=10, m=120, r_star=1, gd=GdConfig(r=10, eta=0.5, alpha=1e-4, T=50),
            base_seed=5, expected_slope=None,
        )
        report = run_scaling_study(config, tmp_path, workers=1)
        validate_report(report)
        res = report["results"]
        assert len(res["mean_selected_error"]) == 4
        assert np.isfinite(res["slope"])
        assert (tmp_path / "scaling.png").exists()
        bound = [a for a in report["assertions"] if a["name"] == "selection-bound"]
        assert bound and bound[0]["passed"]


class TestRipProbe:
    def test_probe_report(self, tmp_path):
        report = run_rip_probe(tmp_path, problem=SENSING, n=10, m=200, k=2,
                               trials=50, base_seed=0)
        validate_report(report)
        assert report["results"]["delta_hat"] < 1.0
        assert (tmp_path / "ratios.csv").exists()
        assert (tmp_path / "ratios.png").exists()


class TestReportSchema:
    def test_rejects_malformed(self):
        with pytest.raises(jsonschema.ValidationError):
            validate_report({"schema_version": 1, "kind": "grid"})
        with pytest.raises(jsonschema.ValidationError):
            validate_report({
                "schema_version": 2, "kind": "grid", "created": "x",
                "config": {}, "assertions": [], "results": {},
            })


class TestCli:
    def test_parse_value(self):
        assert parse_value("3") == 3
        assert parse_value("0.5") == 0.5
        assert parse_value("true") is True
        assert parse_value("sensing") == "sensing"
        assert parse_value("1,2,3") == [1, 2, 3]

    def test_config_file_roundtrip(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("n = 10  # comment\nsigma = 0.3\nrank_values = 1,2\n")
        entries = read_config_file(path)
        assert entries == {"n": 10, "sigma": 0.3, "rank_values": [1, 2]}

    def test_demo_subcommand_exit_code(self, tmp_path):
        out = tmp_path / "run"
        code = cli_main([
            "demo-overfit", "--out", str(out),
            "--set", "n=16", "--set", "r_star=2", "--set", "m=200",
            "--set", "m_val=40", "--set", "sigma=0.4", "--set", "base_seed=1",
            "--set", "r=16", "--set", "T=300", "--set", "alpha=1e-5",
        ])
        assert code == 0
        assert (out / "report.json").exists()
        assert (out / "config.txt").exists()

    def test_grid_subcommand_with_config_file(self, tmp_path):
        cfg = tmp_path / "grid.cfg"
        cfg.write_text(
            "problem = sensing\nn = 12\nm = 150\nm_val = 30\n"
            "rank_values = 1,3\nsigma2_values = 0.05,0.2\ntrials = 1\n"
            "base_seed = 42\nr = 12\nT = 60\nalpha = 1e-4\n"
            "spearman_threshold = -1.0\n"
        )
        out = tmp_path / "gridrun"
        code = cli_main(["grid", "--config", str(cfg), "--out", str(out), "--workers", "1"])
        assert code == 0
        assert (out / "heatmap_selected.png").exists()

    def test_failing_assertion_nonzero_exit(self, tmp_path):
        # An impossible Spearman threshold forces a failed assertion.
        cfg = tmp_path / "grid.cfg"
        cfg.write_text(
            "problem = sensing\nn = 12\nm = 150\nm_val = 30\n"
            "rank_values = 1,3\nsigma2_values = 0.05,0.2\ntrials = 1\n"
            "base_seed = 42\nr = 12\nT = 60\nalpha = 1e-4\n"
            "spearman_threshold = 2.0\n"
        )
        out = tmp_path / "gridrun"
        code = cli_main(["grid", "--config", str(cfg), "--out", str(out), "--workers", "1"])
        assert code == 1

    def test_rip_probe_subcommand(self, tmp_path):
        out = tmp_path / "rip"
        code = cli_main([
            "rip-probe", "--out", str(out),
            "--set", "n=10", "--set", "m=200", "--set", "k=2", "--set", "trials=50",
        ])
        assert code == 0

    def test_worker_env_variable(self, tmp_path, monkeypatch):
        from overfactor.experiments import worker_count

        monkeypatch.setenv("OVERFACTOR_WORKERS", "3")
        assert worker_count() == 3
        assert worker_count(5) == 5
