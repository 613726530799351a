import json
import os

import numpy as np
import pytest

from foliosolve.cli import main
from foliosolve.serialize import load_instance, load_solution, save_instance
from test_model import analytic_single


def run(argv, capsys=None):
    return main(argv)


@pytest.fixture
def analytic_instance_path(tmp_path):
    prob = analytic_single(n=1, gmv=1.0, alpha=0.1, lam1=0.5)
    path = tmp_path / "analytic.json"
    save_instance(prob, path)
    return str(path)


class TestGen:
    def test_deterministic_files(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        args = ["gen", "--seed", "1", "--n", "10", "--days", "100"]
        assert run(args + ["--out", str(d1)]) == 0
        assert run(args + ["--out", str(d2)]) == 0
        f1 = d1 / "panel_seed1_n10_days100.npz"
        f2 = d2 / "panel_seed1_n10_days100.npz"
        assert f1.read_bytes() == f2.read_bytes()

    def test_days_too_small_exits_2(self, tmp_path):
        assert run(["gen", "--days", "10", "--out", str(tmp_path)]) == 2

    def test_env_seed_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FLASHFOLIO_SEED", "9")
        assert run(["gen", "--seed", "1", "--n", "10", "--days", "100",
                    "--out", str(tmp_path)]) == 0
        assert (tmp_path / "panel_seed9_n10_days100.npz").exists()

    def test_unknown_flag_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run(["gen", "--bogus", "1", "--out", str(tmp_path)])
        assert exc.value.code == 2


class TestBuildInstance:
    def test_panel_roundtrip_to_instance(self, tmp_path):
        assert run(["gen", "--seed", "2", "--n", "8", "--days", "90",
                    "--factors", "2", "--out", str(tmp_path)]) == 0
        panel = tmp_path / "panel_seed2_n8_days90.npz"
        inst = tmp_path / "inst.json"
        assert run(["build-instance", "--panel", str(panel),
                    "--out", str(inst)]) == 0
        prob = load_instance(inst)
        assert prob.n == 8

    def test_multi_instance(self, tmp_path):
        assert run(["gen", "--seed", "2", "--n", "8", "--days", "90",
                    "--factors", "2", "--out", str(tmp_path)]) == 0
        panel = tmp_path / "panel_seed2_n8_days90.npz"
        inst = tmp_path / "multi.json"
        assert run(["build-instance", "--panel", str(panel), "--horizon", "3",
                    "--out", str(inst)]) == 0
        prob = load_instance(inst)
        assert prob.horizon == 3

    def test_missing_panel_exits_2(self, tmp_path):
        assert run(["build-instance", "--panel", str(tmp_path / "nope.npz"),
                    "--out", str(tmp_path / "i.json")]) == 2


class TestSolve:
    def test_analytic_solution(self, analytic_instance_path, tmp_path):
        sol = tmp_path / "sol.json"
        assert run(["solve", "--instance", analytic_instance_path,
                    "--out", str(sol)]) == 0
        outcome = load_solution(sol)
        assert outcome.status == "Converged"
        assert outcome.weights[0] == pytest.approx(0.1, abs=1e-7)

    def test_time_limit_exit_1(self, analytic_instance_path, tmp_path):
        sol = tmp_path / "sol.json"
        assert run(["solve", "--instance", analytic_instance_path,
                    "--time-limit", "0.0001", "--out", str(sol)]) == 1
        assert load_solution(sol).status == "TimeLimit"

    def test_parse_error_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        assert run(["solve", "--instance", str(bad),
                    "--out", str(tmp_path / "s.json")]) == 2


class TestCheck:
    def test_verified_solution_passes(self, analytic_instance_path, tmp_path, capsys):
        sol = tmp_path / "sol.json"
        run(["solve", "--instance", analytic_instance_path, "--out", str(sol)])
        cert = tmp_path / "cert.json"
        code = run(["check", "--instance", analytic_instance_path,
                    "--solution", str(sol), "--out", str(cert)])
        assert code == 0
        doc = json.loads(cert.read_text())
        assert doc["passed"] is True
        assert doc["feasibility"]["passed"] is True
        assert doc["directional"]["passed"] is True
        assert doc["grid"]["passed"] is True

    def test_perturbed_solution_fails(self, analytic_instance_path, tmp_path, capsys):
        sol = tmp_path / "sol.json"
        run(["solve", "--instance", analytic_instance_path, "--out", str(sol)])
        doc = json.loads((tmp_path / "sol.json").read_text())
        doc["weights"][0] += 0.1
        sol.write_text(json.dumps(doc))
        code = run(["check", "--instance", analytic_instance_path,
                    "--solution", str(sol)])
        assert code == 1
        out = capsys.readouterr()
        assert "directional" in out.err or "grid" in out.err

    def test_certificate_schema(self, analytic_instance_path, tmp_path):
        sol = tmp_path / "sol.json"
        run(["solve", "--instance", analytic_instance_path, "--out", str(sol)])
        cert = tmp_path / "cert.json"
        run(["check", "--instance", analytic_instance_path,
             "--solution", str(sol), "--out", str(cert)])
        doc = json.loads(cert.read_text())
        assert set(doc) == {"schema_version", "passed", "feasibility",
                            "directional", "grid"}
        assert set(doc["feasibility"]) == {"max_exposure_violation",
                                           "budget_violation", "passed", "tolerance"}
        assert set(doc["directional"]) == {"max_ascent_rate", "directions_tested",
                                           "passed", "tolerance"}


class TestBench:
    def test_mini_grid_deterministic_counts(self, tmp_path):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({
            "lambda1_values": [1e-6], "lambda23_values": [1.0],
            "instances_per_cell": 1, "horizon": 2, "mode": "single", "seed": 3,
            "generator": {"seed": 0, "n": 6, "days": 80, "p": 2},
            "solver": {"time_limit": 60.0},
        }))
        out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        assert run(["bench", "--grid", str(grid), "--out", str(out1)]) == 0
        assert run(["bench", "--grid", str(grid), "--out", str(out2)]) == 0
        strip = lambda p: ["," .join(l.split(",")[:5]) for l in
                           p.read_text().strip().split("\n")]
        assert strip(out1) == strip(out2)
        assert strip(out1)[1] == "1,1e-06,single,1,1"

    def test_missing_grid_file_exits_2(self, tmp_path):
        assert run(["bench", "--grid", str(tmp_path / "none.json"),
                    "--out", str(tmp_path / "r.csv")]) == 2

    def test_markdown_format(self, tmp_path):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({
            "lambda1_values": [1e-6], "lambda23_values": [1.0],
            "instances_per_cell": 1, "horizon": 2, "mode": "single", "seed": 3,
            "generator": {"seed": 0, "n": 6, "days": 80, "p": 2},
            "solver": {"time_limit": 60.0},
        }))
        out = tmp_path / "r.md"
        assert run(["bench", "--grid", str(grid), "--out", str(out),
                    "--format", "markdown"]) == 0
        assert out.read_text().startswith("| lambda2,lambda3 | lambda1 |")


class TestHelp:
    @pytest.mark.parametrize("sub,flags", [
        ("gen", ["--seed", "--n", "--days", "--out"]),
        ("build-instance", ["--panel", "--date-index", "--lambda1", "--horizon"]),
        ("solve", ["--instance", "--tol", "--max-iters", "--time-limit", "--out"]),
        ("bench", ["--grid", "--out", "--format", "--timing-strict"]),
        ("check", ["--instance", "--solution", "--tolerance"]),
    ])
    def test_documents_flags_and_defaults(self, sub, flags, capsys):
        with pytest.raises(SystemExit) as exc:
            main([sub, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for flag in flags:
            assert flag in text

    def test_solve_defaults_listed(self, capsys):
        with pytest.raises(SystemExit):
            main(["solve", "--help"])
        text = capsys.readouterr().out
        assert "1e-8" in text
        assert "360" in text
