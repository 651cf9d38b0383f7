"""
End-to-end tests for the experiment runners on small configurations.

Each run writes table.csv, report.json and plot.gp under tmp_path.
"""

import csv
import json

import pytest

from mfgc.errors import ConfigError
from mfgc.experiments import EXPERIMENTS, get_available_experiments, load_config, run_experiment
from mfgc.experiments.common import config_hash
from mfgc.schemas import ExperimentConfig


def make_config(tmp_path, experiment, **sections):
    data = {"experiment": experiment, "seed": 3, "out": str(tmp_path / "results"), **sections}
    return ExperimentConfig.model_validate(data)


def read_rows(path):
    with open(path, newline="") as f:
        lines = f.read().splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


class TestRegistry:
    """Tests for the experiment registry."""

    def test_all_experiments_registered(self):
        """Test the six experiment ids are available."""
        assert set(get_available_experiments()) == {
            "oracle-check",
            "n-sweep",
            "degeneracy-map",
            "viscosity-sweep",
            "deviation-verify",
            "stability-probe",
        }
        assert all(callable(runner) for runner in EXPERIMENTS.values())


class TestConfigLoading:
    """Tests for config files and hashing."""

    def test_toml_with_overrides(self, tmp_path):
        """Test a TOML config loads and CLI overrides win."""
        path = tmp_path / "run.toml"
        path.write_text('experiment = "oracle-check"\nseed = 1\n[grid]\nsteps = 40\n')
        config = load_config(path, {"seed": 9, "out": None})
        assert config.seed == 9
        assert config.grid.steps == 40

    def test_json_config(self, tmp_path):
        """Test JSON configs are accepted."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"experiment": "degeneracy-map"}))
        assert load_config(path).experiment == "degeneracy-map"

    def test_unknown_key_rejected(self, tmp_path):
        """Test unknown keys raise ConfigError."""
        path = tmp_path / "run.toml"
        path.write_text('experiment = "oracle-check"\n[grid]\nstep = 40\n')
        with pytest.raises(ConfigError):
            load_config(path)

    def test_lq_only_experiment_needs_lq(self, tmp_path):
        """Test LQ-only experiments refuse other models."""
        path = tmp_path / "run.toml"
        path.write_text('experiment = "n-sweep"\n[model]\nname = "quadratic-plus-potential"\n')
        with pytest.raises(ConfigError):
            load_config(path)

    def test_unsupported_suffix(self, tmp_path):
        """Test only .toml and .json are read."""
        path = tmp_path / "run.yaml"
        path.write_text("experiment: oracle-check\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_hash_ignores_out_and_threads(self, tmp_path):
        """Test the output root and the pool size do not change the hash."""
        a = make_config(tmp_path, "oracle-check")
        b = a.model_copy(update={"out": "elsewhere", "threads": 4})
        c = a.model_copy(update={"seed": 4})
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash(c)
        assert len(config_hash(a)) == 12


class TestOracleCheck:
    """Tests for the oracle-check experiment."""

    def test_passes(self, tmp_path):
        """Test solvers agree with the closed forms and the order band holds."""
        config = make_config(
            tmp_path,
            "oracle-check",
            n_players=3,
            grid={"steps": 40},
            oracle_check={"n_particles": 20},
        )
        outcome = run_experiment(config)
        assert outcome.passed, outcome.report["failures"]
        assert outcome.table_path.exists()
        assert outcome.plot_path.exists()
        header, rows = read_rows(outcome.table_path)
        assert header == f"# config_hash={outcome.config_hash}"
        checks = {row["check"] for row in rows}
        assert {"nplayer_X_err", "mfg_A_err", "order_ratio"} <= checks

    def test_degenerate_parameters_fail(self, tmp_path):
        """Test kappa = -(1+gamma) ends in a failed outcome citing the classification."""
        config = make_config(
            tmp_path,
            "oracle-check",
            n_players=3,
            grid={"steps": 40},
            model={"name": "lq", "params": {"kappa": -2.0, "gamma": 1.0}},
        )
        outcome = run_experiment(config)
        assert not outcome.passed
        report = json.loads(outcome.report_path.read_text())
        assert report["degeneracy"]["nplayer"]["classification"] == "NoQuadraticSolution"


class TestDegeneracyMap:
    """Tests for the degeneracy-map experiment."""

    def test_labels(self, tmp_path):
        """Test the degeneracy lines kappa = -2 and 3 + kappa + rho = 0 at gamma = 1."""
        config = make_config(
            tmp_path,
            "degeneracy-map",
            model={"name": "lq", "params": {"kappa": 0.5, "gamma": 1.0}},
            degeneracy_map={
                "kappa": {"start": -4.0, "stop": 4.0, "count": 5},
                "rho": {"start": -5.0, "stop": 3.0, "count": 5},
                "picard": False,
            },
        )
        outcome = run_experiment(config)
        assert outcome.passed
        classes = outcome.report["classifications"]
        assert classes["NoQuadraticSolution"] == 5
        assert classes["NonUniqueFamily"] == 2
        assert classes["Regular"] == 13
        assert outcome.report["labels"]["excluded"] == 5

        _, rows = read_rows(outcome.table_path)
        cells = {(float(r["kappa"]), float(r["rho"])): r for r in rows}
        assert cells[(-4.0, 1.0)]["classification"] == "NonUniqueFamily"
        assert cells[(2.0, -5.0)]["classification"] == "NonUniqueFamily"
        assert all(cells[(-2.0, rho)]["label"] == "degenerate" for rho in (-5.0, -3.0, -1.0, 1.0, 3.0))

    def test_threads_do_not_change_table(self, tmp_path):
        """Test the table is identical with one and with several workers."""
        sections = dict(
            degeneracy_map={
                "kappa": {"start": 1.0, "stop": 3.0, "count": 3},
                "rho": {"start": 0.0, "stop": 1.0, "count": 2},
                "picard_steps": 10,
                "picard_max_iters": 20,
            },
        )
        serial = run_experiment(make_config(tmp_path, "degeneracy-map", threads=1, **sections))
        first = serial.table_path.read_bytes()
        parallel = run_experiment(make_config(tmp_path, "degeneracy-map", threads=3, **sections))
        assert parallel.table_path == serial.table_path
        assert parallel.table_path.read_bytes() == first


class TestNSweep:
    """Tests for the n-sweep experiment."""

    def test_rates(self, tmp_path):
        """Test errors decay in N and the gradient gap has no x-coefficient."""
        config = make_config(
            tmp_path,
            "n-sweep",
            grid={"steps": 100},
            n_sweep={"n_list": [10, 40, 160, 640], "replicates": 20, "reference_samples": 200},
        )
        outcome = run_experiment(config)
        assert outcome.passed, outcome.report["checks"]
        assert outcome.report["checks"]["grad_gap_x_zero"]
        assert outcome.report["slopes"]["traj_error"] < -0.35
        table = outcome.result
        assert list(table.column("N")) == [10, 40, 160, 640]
        header = outcome.table_path.read_text().splitlines()[0]
        assert header == f"# config_hash={outcome.config_hash}"

    def test_slope_windows_reported(self, tmp_path):
        """Test each fitted slope is reported with its window and its margin to the pass limit."""
        config = make_config(
            tmp_path,
            "n-sweep",
            grid={"steps": 40},
            n_sweep={"n_list": [10, 20, 40], "replicates": 2, "reference_samples": 50},
        )
        outcome = run_experiment(config)
        windows = outcome.report["slope_windows"]
        assert windows["traj_error"]["window"] == [-0.65, -0.35]
        assert windows["value_gap"]["window"] == [-0.35, -0.15]
        traj = windows["traj_error"]
        assert traj["slope"] == pytest.approx(outcome.report["slopes"]["traj_error"])
        assert traj["margin"] == pytest.approx(-0.35 - traj["slope"])
        assert any(line.startswith("slope traj_error:") and "window [-0.65, -0.35]" in line
                   for line in outcome.summary)
        saved = json.loads(outcome.report_path.read_text())
        assert saved["slope_windows"]["traj_error"]["window"] == [-0.65, -0.35]

    def test_shifted_law_sets_K(self, tmp_path):
        """Test K(N) equals delta^2 when every player's law is m_0 shifted by delta."""
        config = make_config(
            tmp_path,
            "n-sweep",
            grid={"steps": 50},
            n_sweep={"n_list": [4, 16], "replicates": 2, "shift": 0.3, "reference_samples": 100},
        )
        outcome = run_experiment(config)
        assert outcome.report["K_N"] == pytest.approx(0.09)
        assert outcome.report["shift_floor_ratio"] is not None
        assert outcome.passed

    def test_reproducible(self, tmp_path):
        """Test a rerun with the same config writes byte-identical tables."""
        sections = dict(grid={"steps": 50}, n_sweep={"n_list": [4, 8, 16], "replicates": 3})
        first = run_experiment(make_config(tmp_path, "n-sweep", **sections))
        table = first.table_path.read_bytes()
        report = first.report_path.read_bytes()
        second = run_experiment(make_config(tmp_path, "n-sweep", threads=2, **sections))
        assert second.table_path.read_bytes() == table
        assert second.report_path.read_bytes() == report


class TestViscositySweep:
    """Tests for the viscosity-sweep experiment."""

    def test_offsets(self, tmp_path):
        """Test gains are beta-free and the cost offset is linear in beta."""
        config = make_config(
            tmp_path,
            "viscosity-sweep",
            n_players=3,
            grid={"steps": 200},
            sim={"n_paths": 2000, "dt": 0.01, "antithetic": True},
            viscosity_sweep={"deviation": False},
        )
        outcome = run_experiment(config)
        checks = outcome.report["checks"]
        assert checks["gains_unchanged"]
        assert checks["grad_gap_zero"]
        assert checks["offset_matches_integral"]
        assert checks["offset_linear_in_beta"]
        assert outcome.passed


class TestDeviationVerify:
    """Tests for the deviation-verify experiment."""

    def test_equilibrium_passes_corruption_refuted(self, tmp_path):
        """Test the LQ feedbacks pass and the shifted copy is refuted at beta 0 and 0.5."""
        config = make_config(
            tmp_path,
            "deviation-verify",
            n_players=3,
            grid={"steps": 200},
            init={"law": "dirac", "positions": [-1.0, 0.5, 1.5]},
            sim={"n_paths": 500, "dt": 0.005, "antithetic": True},
        )
        outcome = run_experiment(config)
        assert outcome.passed
        runs = outcome.report["runs"]
        assert len(runs) == 4
        assert all(run["passed"] == (run["feedback"] == "equilibrium") for run in runs)
        _, rows = read_rows(outcome.table_path)
        assert len(rows) == 4 * 12

    def test_player_out_of_range(self, tmp_path):
        """Test deviating players must exist."""
        with pytest.raises(ValueError):
            make_config(tmp_path, "deviation-verify", n_players=3, deviation_verify={"players": [3]})


class TestStabilityProbe:
    """Tests for the stability-probe experiment."""

    def test_lq_ratio_constant(self, tmp_path):
        """Test the LQ ratios agree across epsilons for the coordinate and a random direction."""
        config = make_config(
            tmp_path,
            "stability-probe",
            n_players=3,
            grid={"steps": 50},
            solver={"outer_tol": 1e-12},
            stability_probe={"random_trials": 1},
        )
        outcome = run_experiment(config)
        assert outcome.passed
        assert outcome.report["checks"]["ratio_constant_across_epsilon"]
        assert set(outcome.report["spreads"]) == {0, 1}
        assert outcome.report["max_ratio"] > 0

    def test_declared_constant_exceeded(self, tmp_path):
        """Test a declared stability constant below the observed ratio fails the run."""
        config = make_config(
            tmp_path,
            "stability-probe",
            n_players=3,
            grid={"steps": 50},
            solver={"outer_tol": 1e-12},
            stability_probe={"epsilons": [1e-2, 1e-3], "max_ratio": 1e-6},
        )
        outcome = run_experiment(config)
        assert not outcome.passed
        assert not outcome.report["checks"]["ratio_below_declared_constant"]
