"""End-to-end command-line behavior, driven in-process through main()."""

import json

import pytest

from platoonsim.cli import main

SWEEP_CFG = """\
[params]
model_kind = proposed
k_v = 1.0
k_d = 0.2
k = 0.3
tau_s = 1.4
v_bar = 2.0
u_min = 0.1
u_max = 1.95
T = 10.0

[initial]
positions = 5, 0
velocities = 1, 0

[leader]
v0 = 1.0
profile = 0 10 const 0.0

[controls]
u = 0 10 const 1.9

[sweep]
n = 2
headways = 1, 5
velocities = 0, 1
"""


def run(*argv):
    return main(list(argv))


class TestSimulate:
    def test_preset_happy_path(self, tmp_path, capsys):
        code = run("simulate", "--preset", "fig4", "--out", str(tmp_path))
        assert code == 0
        assert (tmp_path / "trajectory.csv").exists()
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["status"] == "completed"
        assert sorted(manifest["outputs"]) == ["manifest.json", "trajectory.csv"]
        assert "completed" in capsys.readouterr().out

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "s.ini"
        cfg.write_text(SWEEP_CFG, encoding="utf-8")
        code = run("simulate", "--config", str(cfg), "--out", str(tmp_path / "out"))
        assert code == 0

    def test_dt_override_changes_grid(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("simulate", "--preset", "fig4", "--out", str(a)) == 0
        assert run("simulate", "--preset", "fig4", "--out", str(b), "--dt", "0.1") == 0
        rows_a = (a / "trajectory.csv").read_text().count("\n")
        rows_b = (b / "trajectory.csv").read_text().count("\n")
        assert rows_a == 1002 and rows_b == 102

    def test_collision_exit_code(self, tmp_path, capsys):
        code = run("simulate", "--preset", "fig1_right_cacc", "--out", str(tmp_path))
        assert code == 2
        out = capsys.readouterr().out
        assert "collision" in out and "follower 1" in out
        # the truncated trajectory is still written for inspection
        assert (tmp_path / "trajectory.csv").exists()

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("simulate", "--preset", "fig4", "--out", str(a)) == 0
        assert run("simulate", "--preset", "fig4", "--out", str(b)) == 0
        assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
        assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()


class TestBadInput:
    def test_garbage_config(self, tmp_path, capsys):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("not an ini [", encoding="utf-8")
        code = run("simulate", "--config", str(cfg), "--out", str(tmp_path / "o"))
        assert code == 3
        assert "config error" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        code = run("simulate", "--config", str(tmp_path / "nope.ini"),
                   "--out", str(tmp_path / "o"))
        assert code == 3
        assert "cannot read" in capsys.readouterr().err

    def test_scenario_diagnostics(self, tmp_path, capsys):
        cfg = tmp_path / "coincide.ini"
        cfg.write_text(SWEEP_CFG.replace("positions = 5, 0", "positions = 5, 5"),
                       encoding="utf-8")
        code = run("simulate", "--config", str(cfg), "--out", str(tmp_path / "o"))
        assert code == 3
        assert "invalid scenario" in capsys.readouterr().err

    def test_unknown_preset_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("simulate", "--preset", "zig", "--out", str(tmp_path))
        assert exc.value.code == 2

    def test_nonpositive_dt(self, tmp_path, capsys):
        code = run("simulate", "--preset", "fig4", "--out", str(tmp_path), "--dt", "0")
        assert code == 3
        assert "--dt" in capsys.readouterr().err

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run("--version")
        assert exc.value.code == 0
        assert capsys.readouterr().out.startswith("platoonsim ")


class TestCompare:
    def test_three_models_one_summary(self, tmp_path, capsys):
        code = run("compare", "--preset", "fig4", "--out", str(tmp_path))
        assert code == 0
        for name in ("proposed", "cacc", "ovfl"):
            assert (tmp_path / f"{name}.csv").exists()
        lines = (tmp_path / "summary.csv").read_text().splitlines()
        assert lines[0] == ("model,status,min_headway,collision_time,"
                            "terminal_velocity,settle_time,time_to_control_band")
        assert len(lines) == 4
        assert lines[1].startswith("proposed,")

    def test_proposed_settles_fastest_on_reference_data(self, tmp_path):
        code = run("compare", "--preset", "fig1_left", "--out", str(tmp_path))
        assert code == 0
        rows = (tmp_path / "summary.csv").read_text().splitlines()[1:]
        settle = {r.split(",")[0]: float(r.split(",")[5]) for r in rows}
        assert settle["proposed"] < settle["cacc"]
        assert settle["proposed"] < settle["ovfl"]


class TestEnvelope:
    def test_certifies_reference_run(self, tmp_path, capsys):
        code = run("envelope", "--preset", "fig4", "--out", str(tmp_path))
        assert code == 0
        for name in ("trajectory.csv", "envelope.csv", "certification.csv"):
            assert (tmp_path / name).exists()
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["certification_passed"] is True
        assert manifest["certified_min_headway"] > 0.0
        out = capsys.readouterr().out
        assert out.count("pass") == 4

    def test_check_only_reuses_trajectory(self, tmp_path):
        assert run("envelope", "--preset", "fig4", "--out", str(tmp_path)) == 0
        assert run("envelope", "--preset", "fig4", "--out", str(tmp_path),
                   "--check-only") == 0

    def test_check_only_flags_tampered_data(self, tmp_path, capsys):
        assert run("envelope", "--preset", "fig4", "--out", str(tmp_path)) == 0
        path = tmp_path / "trajectory.csv"
        lines = path.read_text().splitlines()
        cells = lines[500].split(",")
        cells[4] = "5.0"  # follower velocity, far outside any envelope
        lines[500] = ",".join(cells)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        code = run("envelope", "--preset", "fig4", "--out", str(tmp_path), "--check-only")
        assert code == 5
        assert "FAIL" in capsys.readouterr().out

    def test_check_only_without_trajectory(self, tmp_path, capsys):
        code = run("envelope", "--preset", "fig4", "--out", str(tmp_path), "--check-only")
        assert code == 3
        assert "no trajectory" in capsys.readouterr().err

    def test_non_proposed_model_rejected(self, tmp_path, capsys):
        code = run("envelope", "--preset", "fig1_left_cacc", "--out", str(tmp_path))
        assert code == 3
        assert "min-type law only" in capsys.readouterr().err


class TestPerturb:
    def test_reference_study(self, tmp_path, capsys):
        code = run("perturb", "--preset", "fig5", "--out", str(tmp_path))
        assert code == 0
        assert (tmp_path / "convergence.csv").exists()
        for eps in ("1.0", "0.5", "0.1", "0.05", "0.01"):
            assert (tmp_path / f"trajectory_eps_{eps}.csv").exists()
        lines = (tmp_path / "convergence.csv").read_text().splitlines()
        assert lines[0] == "eps,sup_distance"
        assert len(lines) == 6
        d = [float(r.split(",")[1]) for r in lines[1:]]
        assert all(b < a for a, b in zip(d, d[1:]))
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["strict"] is False
        assert manifest["eps_admissible_max"] == pytest.approx(0.6)

    def test_strict_override_rejects_overscale(self, tmp_path, capsys):
        code = run("perturb", "--preset", "fig5", "--out", str(tmp_path),
                   "--strict-eps", "true")
        assert code == 3
        assert "admissible scale" in capsys.readouterr().err

    def test_config_without_perturbation_section(self, tmp_path, capsys):
        code = run("perturb", "--preset", "fig4", "--out", str(tmp_path))
        assert code == 3
        assert "[perturbation]" in capsys.readouterr().err


class TestSweep:
    def test_small_grid(self, tmp_path, capsys):
        cfg = tmp_path / "s.ini"
        cfg.write_text(SWEEP_CFG, encoding="utf-8")
        code = run("sweep", "--config", str(cfg), "--out", str(tmp_path / "o"))
        assert code == 0
        lines = (tmp_path / "o" / "runs.csv").read_text().splitlines()
        assert len(lines) == 5
        assert "4/4 runs completed" in capsys.readouterr().out

    def test_worker_fanout_matches_serial(self, tmp_path):
        cfg = tmp_path / "s.ini"
        cfg.write_text(SWEEP_CFG, encoding="utf-8")
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("sweep", "--config", str(cfg), "--out", str(a)) == 0
        assert run("sweep", "--config", str(cfg), "--out", str(b), "--workers", "2") == 0
        assert (a / "runs.csv").read_bytes() == (b / "runs.csv").read_bytes()

    def test_config_without_sweep_section(self, tmp_path, capsys):
        code = run("sweep", "--preset", "fig4", "--out", str(tmp_path))
        assert code == 3
        assert "[sweep]" in capsys.readouterr().err

    def test_bad_worker_count(self, tmp_path, capsys):
        cfg = tmp_path / "s.ini"
        cfg.write_text(SWEEP_CFG, encoding="utf-8")
        code = run("sweep", "--config", str(cfg), "--out", str(tmp_path / "o"),
                   "--workers", "0")
        assert code == 3
