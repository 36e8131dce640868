import json
import os

import numpy as np
import pytest

from palign import AtomicMeasure, run
from palign import io as pio
from palign.cli import main

from conftest import random_state


@pytest.fixture
def short_traj(rng, loose_config, params23):
    s = random_state(rng, n=8, d=2, vscale=0.4)
    return run(s, params23, loose_config, t_end=0.3, observer_stride=5)


class TestTrajectoryIO:
    def test_roundtrip_bitwise(self, short_traj, tmp_path):
        base = str(tmp_path / "traj")
        pio.save_trajectory(short_traj, base)
        back = pio.load_trajectory(base)
        assert len(back.steps) == len(short_traj.steps)
        for a, b in zip(short_traj.steps, back.steps):
            assert a.state.t == b.state.t
            np.testing.assert_array_equal(a.state.x, b.state.x)
            np.testing.assert_array_equal(a.state.v, b.state.v)
            assert a.accepted_dt == b.accepted_dt
        assert back.params == short_traj.params
        assert [e.kind for e in back.events] == [e.kind for e in short_traj.events]

    def test_sidecar_contents(self, short_traj, tmp_path):
        base = str(tmp_path / "traj")
        _, sidecar_path = pio.save_trajectory(short_traj, base)
        with open(sidecar_path) as fh:
            sidecar = json.load(fh)
        assert sidecar["format_version"] == 1
        assert sidecar["params"]["n_particles"] == 8
        assert len(sidecar["samples"]) == len(short_traj.steps)
        assert sidecar["samples"][0]["diagnostics"]["energy_E"] >= 0.0

    def test_diagnostics_csv(self, short_traj, tmp_path):
        path = str(tmp_path / "diag.csv")
        pio.save_diagnostics_csv(short_traj, path)
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        assert header == ["t", "E", "Dp", "Dalpha", "p0", "p1", "Vmax", "Xmax", "dmin"]


class TestMeasureIO:
    def test_roundtrip_bitwise(self, rng, tmp_path):
        mu = AtomicMeasure(rng.normal(0, 1, (7, 3)), rng.uniform(0, 1, 7))
        base = str(tmp_path / "mu")
        pio.save_measure(mu, base)
        back = pio.load_measure(base + ".csv")
        np.testing.assert_array_equal(back.points, mu.points)
        np.testing.assert_array_equal(back.weights, mu.weights)


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh)


RUN_CFG = {
    "scenario": "two_particle",
    "params": {"alpha": 2.0, "p": 5.0, "d": 1, "n_particles": 2},
    "integrator": {
        "rel_tol": 1e-10, "abs_tol": 1e-10, "dt_init": 1e-4, "dt_max": 0.05,
        "dt_min": 1e-14, "collision_eps": None, "kappa": 0.5,
    },
    "initial": {"r0": 1.0, "matched": True},
    "t_end": 10.0,
    "name": "twopart",
}


class TestCli:
    def test_run_collision_exit_2(self, tmp_path, capsys):
        cfg = str(tmp_path / "run.json")
        write_json(cfg, RUN_CFG)
        code = main(["run", "--config", cfg, "--out", str(tmp_path / "out")])
        assert code == 2
        out = capsys.readouterr().out
        assert "Collision" in out
        sidecar = json.load(open(tmp_path / "out" / "twopart.json"))
        assert sidecar["events"][0]["kind"] == "Collision"

    def test_run_avoidance_exit_0(self, tmp_path):
        cfg_obj = dict(RUN_CFG)
        cfg_obj["scenario"] = "random_cloud"
        cfg_obj["params"] = {"alpha": 1.0, "p": 3.0, "d": 1, "n_particles": 8}
        cfg_obj["initial"] = {
            "rho0": {"kind": "uniform_ball", "center": [0.0], "radius": 0.5},
            "u0": {"kind": "two_cluster", "axis": 0, "speed": 0.2},
            "seed": 1,
        }
        cfg_obj["t_end"] = 1.0
        cfg_obj["integrator"] = dict(cfg_obj["integrator"], dt_max=0.02)
        cfg = str(tmp_path / "run.json")
        write_json(cfg, cfg_obj)
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 0

    def test_malformed_config_names_field(self, tmp_path, capsys):
        cfg = str(tmp_path / "bad.json")
        write_json(cfg, {"scenario": "two_particle"})
        assert main(["run", "--config", cfg]) == 1
        err = capsys.readouterr().err
        assert "params" in err

    def test_missing_config_file(self, capsys):
        assert main(["run", "--config", "/nonexistent.json"]) == 1
        assert "not found" in capsys.readouterr().err

    def test_seed_override_changes_cloud(self, tmp_path):
        cfg_obj = dict(RUN_CFG)
        cfg_obj["scenario"] = "random_cloud"
        cfg_obj["params"] = {"alpha": 1.0, "p": 2.0, "d": 1, "n_particles": 4}
        cfg_obj["initial"] = {
            "rho0": {"kind": "uniform_ball", "center": [0.0], "radius": 0.5},
            "u0": {"kind": "constant", "value": [0.1]},
            "seed": 1,
        }
        cfg_obj["t_end"] = 0.0
        cfg = str(tmp_path / "run.json")
        write_json(cfg, cfg_obj)
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
        assert main(["run", "--config", cfg, "--seed", "2", "--out", str(tmp_path / "b")]) == 0
        a = open(tmp_path / "a" / "twopart.csv").read()
        b = open(tmp_path / "b" / "twopart.csv").read()
        assert a != b

    def test_run_determinism_byte_identical(self, tmp_path):
        cfg = str(tmp_path / "run.json")
        write_json(cfg, RUN_CFG)
        main(["run", "--config", cfg, "--out", str(tmp_path / "x")])
        main(["run", "--config", cfg, "--out", str(tmp_path / "y")])
        assert (tmp_path / "x" / "twopart.csv").read_bytes() == (
            tmp_path / "y" / "twopart.csv"
        ).read_bytes()

    def test_oracle_sweep(self, tmp_path):
        grid = str(tmp_path / "grid.json")
        write_json(
            grid,
            {"rows": [
                {"alpha": 2.0, "p": 5.0, "r0": 1.0},
                {"alpha": 2.0, "p": 3.0, "r0": 1.0},
            ]},
        )
        out = str(tmp_path / "sweep.csv")
        assert main(["oracle-sweep", "--grid", grid, "--out", out]) == 0
        lines = open(out).read().strip().splitlines()
        assert lines[0] == "alpha,p,r0,tc_closed,tc_integrated,rel_err,status"
        row1 = lines[1].split(",")
        assert row1[-1] == "closed-form"
        assert float(row1[5]) <= 1e-6  # rel_err cross-check
        assert lines[2].split(",")[-1] == "no-collision"

    def test_oracle_sweep_empty_grid(self, tmp_path):
        grid = str(tmp_path / "grid.json")
        write_json(grid, {"rows": []})
        out = str(tmp_path / "sweep.csv")
        assert main(["oracle-sweep", "--grid", grid, "--out", out]) == 0
        assert open(out).read().startswith("alpha,p,r0")

    def test_dbl_command(self, tmp_path, capsys):
        mu = AtomicMeasure([[0.0]], [1.0])
        nu = AtomicMeasure([[0.7]], [1.0])
        pio.save_measure(mu, str(tmp_path / "mu"))
        pio.save_measure(nu, str(tmp_path / "nu"))
        assert main(["dbl", str(tmp_path / "mu.csv"), str(tmp_path / "nu.csv")]) == 0
        assert float(capsys.readouterr().out.strip()) == pytest.approx(0.7, abs=1e-9)
        assert main(["dbl", str(tmp_path / "mu.csv"), str(tmp_path / "mu.csv")]) == 0
        assert float(capsys.readouterr().out.strip()) == 0.0

    def test_study_single_n_rejected(self, tmp_path, capsys):
        cfg = str(tmp_path / "study.json")
        write_json(
            cfg,
            {
                "spec": {
                    "rho0": {"kind": "uniform_ball", "center": [0.0], "radius": 0.5},
                    "u0": {"kind": "constant", "value": [0.1]},
                },
                "params": {"alpha": 1.0, "p": 3.0, "d": 1, "n_particles": 8},
                "N_list": [16],
                "T": 0.5,
                "h": 0.1,
            },
        )
        assert main(["study", "--config", cfg]) == 1
        assert "N_list" in capsys.readouterr().err

    def test_study_end_to_end(self, tmp_path):
        cfg = str(tmp_path / "study.json")
        write_json(
            cfg,
            {
                "spec": {
                    "rho0": {"kind": "uniform_ball", "center": [0.0], "radius": 0.5},
                    "u0": {"kind": "constant", "value": [0.2]},
                },
                "params": {"alpha": 1.0, "p": 3.0, "d": 1, "n_particles": 8},
                "integrator": {
                    "rel_tol": 1e-8, "abs_tol": 1e-8, "dt_init": 1e-3,
                    "dt_max": 0.05, "dt_min": 1e-14, "collision_eps": None,
                    "kappa": 0.5,
                },
                "N_list": [8, 16, 32],
                "T": 0.5,
                "h": 0.1,
                "seeds": [0, 1, 2],
            },
        )
        out = str(tmp_path / "rep")
        code = main(["study", "--config", cfg, "--out", out])
        # constant field: zero W everywhere, sampling-only distances
        assert code == 0
        summary = json.load(open(os.path.join(out, "study_summary.json")))
        assert summary["trend"]["monokineticity_non_increasing"]
        assert max(summary["median_W_final"]) <= 1e-30  # constant field
        assert os.path.exists(os.path.join(out, "study_dbl_density.csv"))
        # determinism makes a rerun byte-identical
        out2 = str(tmp_path / "rep2")
        assert main(["study", "--config", cfg, "--out", out2]) == 0
        for name in ("study_summary.json", "study_dbl_density.csv", "study_W.csv"):
            a = open(os.path.join(out, name), "rb").read()
            b = open(os.path.join(out2, name), "rb").read()
            assert a == b, name
