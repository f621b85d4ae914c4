import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from btclab.cli import main
from btclab.sweep import (
    CSV_HEADER,
    ConfigError,
    SweepConfig,
    read_csv,
    run_sweep,
)


def small_config(tmp_path, tasks=("magnetization",), workers=1):
    return SweepConfig(
        n_list=(4, 8),
        omega_grid=(0.5, 1.0),
        tasks=tasks,
        out_dir=str(tmp_path),
        workers=workers,
        theta_points=9,
        phi_points=5,
    )


class TestConfig:
    def test_empty_grid_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            SweepConfig(n_list=(4,), omega_grid=(), out_dir=str(tmp_path))

    def test_unknown_task_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            SweepConfig(n_list=(4,), omega_grid=(0.5,), tasks=("bogus",),
                        out_dir=str(tmp_path))

    def test_from_json_with_overrides(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "n_list": [4, 8], "omega_grid": [0.5], "tasks": ["magnetization"],
        }))
        cfg = SweepConfig.from_json(cfg_path, workers=2, out_dir=str(tmp_path))
        assert cfg.workers == 2
        assert cfg.n_list == (4, 8)

    def test_from_json_unknown_field(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"n_list": [4], "omega_grid": [0.5],
                                        "frobnicate": 1}))
        with pytest.raises(ConfigError):
            SweepConfig.from_json(cfg_path)

    def test_tolerance_hash_changes_with_delta(self, tmp_path):
        a = small_config(tmp_path)
        b = SweepConfig(**{**a.__dict__, "delta_omega": 2e-3})
        assert a.tolerance_hash() != b.tolerance_hash()


class TestRunSweep:
    def test_magnetization_row(self, tmp_path):
        cfg = small_config(tmp_path)
        records, failed = run_sweep(cfg)
        assert failed == 0
        assert len(records) == 4
        rec = next(r for r in records if r.n_spins == 8 and r.omega_over_kappa == 0.5)
        assert rec.sz_ss_per_n < 0
        assert rec.qfi is None  # not requested

    def test_csv_schema_and_determinism(self, tmp_path):
        cfg = small_config(tmp_path)
        run_sweep(cfg)
        csv_path = Path(cfg.out_dir) / "sweep.csv"
        first = csv_path.read_bytes()
        assert first.decode().splitlines()[0] == CSV_HEADER
        run_sweep(cfg)  # cached re-run must be byte-identical
        assert csv_path.read_bytes() == first

    def test_cache_hit_skips_compute(self, tmp_path, monkeypatch):
        cfg = small_config(tmp_path)
        run_sweep(cfg)
        import btclab.sweep as sweep_mod

        def boom(*a, **k):
            raise AssertionError("steady state recomputed despite cache")

        monkeypatch.setattr(sweep_mod, "steady_state", boom)
        monkeypatch.setattr(sweep_mod, "make_steady_fn",
                            lambda *a, **k: boom)
        records, failed = run_sweep(cfg)
        assert failed == 0
        assert all(r.sz_ss_per_n is not None for r in records)

    def test_force_recomputes(self, tmp_path):
        cfg = small_config(tmp_path)
        run_sweep(cfg)
        sidecars = sorted(Path(cfg.cache_dir).glob("*.json"))
        stamps = [json.loads(p.read_text())["timestamp"] for p in sidecars]
        records, failed = run_sweep(cfg, force=True)
        assert failed == 0
        assert sorted(Path(cfg.cache_dir).glob("*.json")) == sidecars

    def test_parallel_matches_serial(self, tmp_path):
        serial_cfg = small_config(tmp_path / "serial")
        parallel_cfg = small_config(tmp_path / "parallel", workers=2)
        serial, _ = run_sweep(serial_cfg)
        parallel, _ = run_sweep(parallel_cfg)
        assert (Path(serial_cfg.out_dir) / "sweep.csv").read_text() == (
            Path(parallel_cfg.out_dir) / "sweep.csv").read_text()

    def test_all_tasks_populate_fields(self, tmp_path):
        cfg = small_config(tmp_path, tasks=("magnetization", "qfi", "cfi", "spectrum"))
        records, failed = run_sweep(cfg)
        assert failed == 0
        for rec in records:
            assert rec.sz_ss_per_n is not None
            assert rec.qfi is not None and rec.qfi >= 0
            assert rec.cfi_max is not None
            assert rec.cfi_max <= rec.qfi * (1 + 1e-6) + 1e-9
            assert rec.e2_abs is not None and rec.e2_abs > 0

    def test_read_csv_roundtrip(self, tmp_path):
        cfg = small_config(tmp_path)
        records, _ = run_sweep(cfg)
        loaded = read_csv(Path(cfg.out_dir) / "sweep.csv")
        assert [(r.n_spins, r.omega_over_kappa) for r in loaded] == [
            (r.n_spins, r.omega_over_kappa) for r in records
        ]


class TestCli:
    def test_trajectory_command(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, [
            "trajectory", "--n", "6", "--omega", "0.5", "--tmax", "4",
            "--points", "41", "--out", str(tmp_path), "--no-plot",
        ])
        assert result.exit_code == 0, result.output
        csv_path = tmp_path / "trajectory_N6_w0.5.csv"
        assert csv_path.exists()
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "t,sz_per_n"
        assert len(lines) == 42

    def test_trajectory_plot_rendered(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, [
            "trajectory", "--n", "4", "--omega", "1.5", "--tmax", "2",
            "--points", "21", "--out", str(tmp_path),
        ])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "trajectory_N4_w1.5.png").exists()

    def test_spectrum_command(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, [
            "spectrum", "--n", "6", "--omega", "0.5", "--k", "5",
            "--out", str(tmp_path), "--no-plot",
        ])
        assert result.exit_code == 0, result.output
        pairs = json.loads((tmp_path / "spectrum_N6_w0.5.json").read_text())
        assert len(pairs) == 5
        assert all(len(p) == 2 for p in pairs)
        assert max(p[0] for p in pairs) <= 1e-9  # all decaying

    def test_magnetization_command_and_exit_codes(self, tmp_path):
        runner = CliRunner()
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n_list": [4], "omega_grid": [0.5, 1.0]}))
        result = runner.invoke(main, [
            "magnetization", "--config", str(cfg), "--out", str(tmp_path / "out"),
        ])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "out" / "sweep.csv").exists()

    def test_config_error_exit_code(self, tmp_path):
        runner = CliRunner()
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n_list": [], "omega_grid": [0.5]}))
        result = runner.invoke(main, ["magnetization", "--config", str(cfg)])
        assert result.exit_code == 2

    def test_unknown_command_usage(self):
        runner = CliRunner()
        result = runner.invoke(main, ["frobnicate"])
        assert result.exit_code != 0

    def test_fit_command(self, tmp_path):
        data = tmp_path / "peaks.csv"
        n = np.array([4, 8, 16, 32])
        data.write_text("n,y\n" + "\n".join(
            f"{ni},{2.0 * ni**1.5:.12g}" for ni in n) + "\n")
        runner = CliRunner()
        result = runner.invoke(main, [
            "fit", "--model", "powerlaw", "--input", str(data),
            "--out", str(tmp_path), "--no-plot",
        ])
        assert result.exit_code == 0, result.output
        fit = json.loads((tmp_path / "fit_power.json").read_text())
        assert fit["params"]["b"] == pytest.approx(1.5, rel=1e-8)

    def test_bound_check_command(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, [
            "bound-check", "--n", "6", "--omega", "0.8",
        ])
        assert result.exit_code == 0, result.output
        assert "PASS" in result.output

    def test_collapse_command(self, tmp_path):
        # synthetic sweep CSV following the exact scaling form
        rows = [CSV_HEADER]
        omega_c, nu, beta = 1.0, 1.4, 0.45
        for n in (16, 32, 64, 128):
            x = np.linspace(omega_c - 3 * n ** (-1 / nu),
                            omega_c + 3 * n ** (-1 / nu), 31)
            u = n ** (1 / nu) * (x - omega_c)
            f = 1.0 / (1.0 + np.exp(u)) + 0.2 * np.exp(-(u**2))
            sz_per_n = n ** (-beta / nu) * f  # |<Sz>|/N scaling form
            for xi, yi in zip(x, sz_per_n):
                rows.append(f"{n},{xi:.12g},{-yi:.12g},,,,,")
        csv_path = tmp_path / "sweep.csv"
        csv_path.write_text("\n".join(rows) + "\n")
        runner = CliRunner()
        result = runner.invoke(main, [
            "collapse", "--kind", "magnetization", "--input", str(csv_path),
            "--out", str(tmp_path), "--no-plot",
        ])
        assert result.exit_code == 0, result.output
        fit = json.loads((tmp_path / "collapse_magnetization.json").read_text())
        assert fit["omega_c"] == pytest.approx(omega_c, abs=0.02)
        assert fit["nu"] == pytest.approx(nu, abs=0.2)
        assert fit["beta"] == pytest.approx(beta, abs=0.1)
