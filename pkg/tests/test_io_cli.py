"""Problem-file schema, serialization contracts, and CLI exit codes."""

import json
from pathlib import Path

import numpy as np
import pytest

from varelax.cli import main
from varelax.errors import SchemaError
from varelax.io import emit_trajectory, parse_problem, read_trajectory
from varelax.problem import DPConfig
from varelax.solve import solve_relaxed

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"


def write_problem(tmp_path, doc, name="case.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


MINIMAL = {
    "horizon": {"T": 1.0, "a": 0.0, "b": 1.0},
    "f": {"base": {"name": "power_p", "params": {"p": 2.0}}},
    "g": {"base": {"name": "zero"}},
    "numerics": {"n_t": 8, "n_x": 9, "state_box": [0.0, 1.0], "velocity_cap": 2.0},
}


class TestParseProblem:
    def test_minimal_file(self, tmp_path):
        loaded = parse_problem(write_problem(tmp_path, MINIMAL))
        assert loaded.problem.horizon == 1.0
        assert loaded.config.n_t == 8
        assert loaded.radius_schedule is None

    def test_nonpositive_horizon_rejected(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["horizon"]["T"] = -1.0
        with pytest.raises(SchemaError):
            parse_problem(write_problem(tmp_path, doc))

    def test_unknown_keys_rejected(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["extra"] = 1
        with pytest.raises(SchemaError, match="unknown keys"):
            parse_problem(write_problem(tmp_path, doc))

    def test_unknown_catalog_name(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["f"]["base"]["name"] = "septic_spline"
        with pytest.raises(SchemaError, match="septic_spline"):
            parse_problem(write_problem(tmp_path, doc))

    def test_nonfinite_rejected(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["numerics"]["velocity_cap"] = 1e999  # becomes inf in JSON parsing
        with pytest.raises(SchemaError):
            parse_problem(write_problem(tmp_path, doc))

    def test_bundled_problems_parse(self):
        for path in sorted(PROBLEMS.glob("*.json")):
            loaded = parse_problem(path)
            assert loaded.problem.horizon > 0

    def test_weak_margin_parses_but_fails_hypotheses(self, tmp_path):
        # a declared state slope beyond the velocity bound is a certificate
        # failure, not a parse failure
        from varelax.classify import hypothesis_check

        doc = json.loads(json.dumps(MINIMAL))
        doc["f"] = {"base": {"name": "linear_minus_sqrt"}}
        doc["g"] = {"base": {"name": "concave_quadratic", "params": {"kappa": 2.0}}}
        doc["numerics"]["state_box"] = [-1.0, 1.0]
        loaded = parse_problem(write_problem(tmp_path, doc))
        report = hypothesis_check(loaded.problem)
        assert not report.h2_pass


class TestTrajectoryRoundTrip:
    def test_bit_exact_round_trip(self, tmp_path):
        loaded = parse_problem(PROBLEMS / "quadratic.json")
        cfg = DPConfig(n_t=16, n_x=17)
        traj = solve_relaxed(loaded.problem, cfg)
        path = tmp_path / "traj.csv"
        emit_trajectory(traj, path)
        back = read_trajectory(path, loaded.problem, cfg)
        np.testing.assert_array_equal(back.times, traj.times)
        np.testing.assert_array_equal(back.states, traj.states)
        np.testing.assert_array_equal(back.velocities, traj.velocities)

    def test_row_count_and_header(self, tmp_path):
        loaded = parse_problem(PROBLEMS / "quadratic.json")
        traj = solve_relaxed(loaded.problem, DPConfig(n_t=4, n_x=5))
        path = tmp_path / "traj.csv"
        emit_trajectory(traj, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x,xdot"
        assert len(lines) == 6  # header + 5 node rows

    def test_lf_line_endings(self, tmp_path):
        loaded = parse_problem(PROBLEMS / "quadratic.json")
        traj = solve_relaxed(loaded.problem, DPConfig(n_t=4, n_x=5))
        path = tmp_path / "traj.csv"
        emit_trajectory(traj, path)
        raw = path.read_bytes()
        assert b"\r" not in raw

    def test_mismatched_endpoints_rejected(self, tmp_path):
        loaded = parse_problem(PROBLEMS / "quadratic.json")
        path = tmp_path / "bad.csv"
        path.write_text("t,x,xdot\n0,0.5,1\n1,1.5,1\n")
        with pytest.raises(SchemaError, match="endpoint"):
            read_trajectory(path, loaded.problem, DPConfig(n_t=8, n_x=9))


class TestCliExitCodes:
    def test_usage_error(self, capsys):
        assert main(["frobnicate"]) == 1
        capsys.readouterr()

    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["relax", str(bad)]) == 2
        capsys.readouterr()

    def test_infeasible_cap(self, tmp_path, capsys):
        out = tmp_path / "out.csv"
        code = main(
            ["relax", str(PROBLEMS / "quadratic.json"), "--xi-max", "0.5", "--out", str(out)]
        )
        assert code == 3
        capsys.readouterr()

    def test_classify_bounded_family_fails_certificates(self, tmp_path, capsys):
        out = tmp_path / "cert.json"
        code = main(["classify", str(PROBLEMS / "sqrt_one_plus.json"), "--out", str(out)])
        assert code == 4
        doc = json.loads(out.read_text())
        assert doc["class_e"]["verdict"] == "bounded"
        assert doc["required"]["class_e_diverges"] is False
        capsys.readouterr()

    def test_classify_quadratic_passes(self, tmp_path):
        out = tmp_path / "cert.json"
        code = main(
            ["classify", str(PROBLEMS / "quadratic.json"), "--out", str(out), "--plot-data"]
        )
        assert code == 0
        assert (tmp_path / "cert_chi.csv").exists()

    def test_relax_writes_trajectory_and_report(self, tmp_path):
        out = tmp_path / "traj.csv"
        code = main(
            [
                "relax",
                str(PROBLEMS / "quadratic.json"),
                "--n-t", "16", "--n-x", "17",
                "--out", str(out),
                "--plot-data",
            ]
        )
        assert code == 0
        assert out.exists()
        assert (tmp_path / "traj_dr.json").exists()
        assert (tmp_path / "traj_energy.csv").exists()

    def test_sweep_settles(self, tmp_path):
        out = tmp_path / "sweep.json"
        code = main(
            [
                "sweep",
                str(PROBLEMS / "quadratic.json"),
                "--n-t", "32", "--n-x", "32",
                "--l-schedule", "0.25:4:16",
                "--out", str(out),
                "--plot-data",
            ]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["settle_index"] is not None
        assert (tmp_path / "sweep_vl.csv").exists()

    def test_sweep_without_settle_fails_acceptance(self, tmp_path):
        # every entry sits below the minimal speed budget of any path,
        # so no settle index exists
        out = tmp_path / "sweep.json"
        code = main(
            [
                "sweep",
                str(PROBLEMS / "quadratic.json"),
                "--n-t", "32", "--n-x", "32",
                "--l-schedule", "0.1:0.5:8",
                "--out", str(out),
            ]
        )
        assert code == 5
        doc = json.loads(out.read_text())
        assert doc["settle_index"] is None
        assert all(v is None for v in doc["values"])

    def test_sweep_without_theta_is_schema_error(self, tmp_path, capsys):
        code = main(
            [
                "sweep",
                str(PROBLEMS / "doublewell.json"),
                "--l-schedule", "0.5:2:8",
                "--out", str(tmp_path / "s.json"),
            ]
        )
        assert code == 2
        capsys.readouterr()

    def test_solve_doublewell_pipeline(self, tmp_path):
        out = tmp_path / "solution.json"
        code = main(["solve", str(PROBLEMS / "doublewell.json"), "--out", str(out)])
        assert code == 0
        assert (tmp_path / "solution_relaxed.csv").exists()
        rec_csv = tmp_path / "solution_reconstructed.csv"
        assert rec_csv.exists()
        rows = rec_csv.read_text().splitlines()[1:]
        speeds = {float(r.split(",")[2]) for r in rows}
        assert speeds <= {-1.0, 1.0}
        doc = json.loads(out.read_text())
        assert doc["comparison"]["passed"] is True
        assert doc["relaxed_value"] <= 1e-9

    def test_verify_and_decompose_on_emitted_trajectory(self, tmp_path):
        traj_csv = tmp_path / "traj.csv"
        assert (
            main(
                [
                    "relax",
                    str(PROBLEMS / "doublewell.json"),
                    "--n-t", "16", "--n-x", "17",
                    "--out", str(traj_csv),
                ]
            )
            == 0
        )
        code = main(
            [
                "verify",
                str(PROBLEMS / "doublewell.json"),
                "--n-t", "16", "--n-x", "17",
                "--traj", str(traj_csv),
                "--out", str(tmp_path / "verify.json"),
            ]
        )
        assert code == 0
        code = main(
            [
                "decompose",
                str(PROBLEMS / "doublewell.json"),
                "--n-t", "16", "--n-x", "17",
                "--traj", str(traj_csv),
                "--out", str(tmp_path / "track.json"),
            ]
        )
        assert code == 0
        doc = json.loads((tmp_path / "track.json").read_text())
        assert doc["support_radius"] <= 1.0 + 1e-12

    def test_solve_time_varying_pipeline(self, tmp_path):
        out = tmp_path / "tv.json"
        code = main(["solve", str(PROBLEMS / "doublewell_timevarying.json"), "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        # relaxed cost is the mixed well depth, about 0.5*(1 - cos 1)
        assert doc["relaxed_value"] == pytest.approx(0.5 * (1 - np.cos(1.0)), abs=5e-3)
        assert doc["comparison"]["passed"] is True
        assert doc["decomposition"]["support_radius"] <= 1.0 + 1e-12

    def test_sweep_tol_override_loosens_settle(self, tmp_path):
        out = tmp_path / "sweep.json"
        code = main(
            [
                "sweep",
                str(PROBLEMS / "quadratic.json"),
                "--n-t", "32", "--n-x", "32",
                "--l-schedule", "1.2:4:8",
                "--tol", "10.0",
                "--out", str(out),
            ]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["settle_index"] == 0  # everything within the loose tolerance

    def test_reconstructed_piece_labels_alternate(self, tmp_path):
        out = tmp_path / "run.json"
        code = main(
            [
                "solve",
                str(PROBLEMS / "doublewell_concave.json"),
                "--n-t", "64", "--n-x", "33",
                "--out", str(out),
            ]
        )
        assert code == 0
        rows = (tmp_path / "run_reconstructed.csv").read_text().splitlines()
        assert rows[0] == "t,x,xdot,piece"
        labels = {int(r.split(",")[3]) for r in rows[1:]}
        assert labels == {0, 1}

    def test_verify_emits_energy_csv(self, tmp_path):
        traj_csv = tmp_path / "traj.csv"
        assert (
            main(
                [
                    "relax",
                    str(PROBLEMS / "quadratic.json"),
                    "--n-t", "16", "--n-x", "17",
                    "--out", str(traj_csv),
                ]
            )
            == 0
        )
        out = tmp_path / "verify.json"
        code = main(
            [
                "verify",
                str(PROBLEMS / "quadratic.json"),
                "--n-t", "16", "--n-x", "17",
                "--traj", str(traj_csv),
                "--out", str(out),
            ]
        )
        assert code == 0
        energy = (tmp_path / "verify_energy.csv").read_text().splitlines()
        assert energy[0] == "t,E,drift,residual"
        assert len(energy) == 17  # header + one row per interval

    def test_byte_identical_reruns(self, tmp_path):
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        a_dir.mkdir()
        b_dir.mkdir()
        for d in (a_dir, b_dir):
            code = main(
                [
                    "solve",
                    str(PROBLEMS / "doublewell.json"),
                    "--n-t", "32", "--n-x", "33",
                    "--out", str(d / "run.json"),
                ]
            )
            assert code == 0
        for name in ("run.json", "run_relaxed.csv", "run_reconstructed.csv"):
            assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes()
