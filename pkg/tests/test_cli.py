import json

import numpy as np
import pytest

from phasecoh import cli
from phasecoh.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_VERIFY, main, parse_state, read_sweep_csv
from phasecoh.costfn import CostFunction, cost_matrix
from phasecoh.sdp import SolverFailure


def mat(obj):
    return np.array(obj["re"]) + 1j * np.array(obj["im"])


def quad_coefficient(f, k):
    from scipy.integrate import quad
    re = quad(lambda x: f(x) * np.cos(k * x), -np.pi, np.pi, epsabs=1e-12, limit=200, points=[-1.5708, 1.5708])[0]
    im = quad(lambda x: -f(x) * np.sin(k * x), -np.pi, np.pi, epsabs=1e-12, limit=200, points=[-1.5708, 1.5708])[0]
    return (re + 1j * im) / (2 * np.pi)


def run_json(capsys, *argv):
    code = main(list(argv))
    assert code == EXIT_OK
    return json.loads(capsys.readouterr().out)


def test_cost_matrix_holevo(capsys):
    out = run_json(capsys, "cost-matrix", "--cost", "holevo", "--m", "2")
    assert np.abs(mat(out["matrix"]) - [[2, -1], [-1, 2]]).max() < 1e-12


def test_cost_matrix_constant_and_window(capsys, tmp_path):
    out = run_json(capsys, "cost-matrix", "--cost", "constant:1", "--m", "4")
    assert np.abs(mat(out["matrix"]) - np.eye(4)).max() < 1e-12
    path = tmp_path / "y.json"
    assert main(["cost-matrix", "--cost", "window:1.5708", "--m", "3", "--out", str(path)]) == EXIT_OK
    y = mat(json.loads(path.read_text())["matrix"])
    f = CostFunction.window(1.5708)
    for k in range(3):
        ck = quad_coefficient(f, k)
        assert abs(y[0, 0] - quad_coefficient(f, 0)) < 1e-9
        assert min(abs(y[0, k] - ck), abs(y[0, k] - np.conj(ck))) < 1e-9


def test_cmin_plus(capsys):
    out = run_json(capsys, "cmin", "--state", "plus", "--m", "2")
    assert abs(out["cmin"] - 1) < 1e-6
    assert abs(out["qubit_exact"] - 1) < 1e-12
    assert out["gap"] <= 1e-6


def test_cmin_diagonal_state(capsys):
    out = run_json(capsys, "cmin", "--state", "diag:0.2,0.3,0.5")
    c0 = cost_matrix(CostFunction.holevo(), 3).c0
    assert abs(out["cmin"] - c0) < 1e-6 and abs(out["advantage"]) < 1e-6


def test_cmin_isotropic_bound_tight(capsys):
    out = run_json(capsys, "cmin", "--state", "isotropic:0.4:3", "--d", "2", "--n", "2")
    assert out["m"] == 3
    assert abs(out["cmin"] - out["weight_bound"]) < 1e-5


def test_cmin_state_file(capsys, tmp_path):
    f = tmp_path / "rho.json"
    f.write_text(json.dumps(parse_state("ginibre:2:4").to_json()))
    out = run_json(capsys, "cmin", "--state", str(f), "--m", "2")
    assert abs(out["cmin"] - out["qubit_exact"]) < 1e-5


@pytest.mark.parametrize("argv", [
    ["cmin", "--state", "nonsense"],
    ["cmin", "--m", "2"],
    ["cmin", "--state", "diag:0.5,0.6"],
    ["cost-matrix", "--cost", "bogus:3", "--m", "2"],
    ["cost-matrix", "--m", "99"],
    ["cost-matrix", "--d", "2", "--n", "2", "--m", "4"],
    ["cost-matrix", "--n", "2"],
    ["sweep", "--count", "0"],
    ["verify", "--only", "nope"],
    ["frobnicate"],
])
def test_config_errors(argv):
    assert main(argv) == EXIT_CONFIG


def test_solver_failure_exit(monkeypatch):
    def boom(*a, **k):
        raise SolverFailure("forced", "infeasible", {})
    monkeypatch.setattr(cli, "cmin_single", boom)
    assert main(["cmin", "--state", "plus"]) == EXIT_SOLVER
    assert main(["sweep", "--d", "2", "--count", "2"]) == EXIT_SOLVER


def test_sweep_deterministic(tmp_path):
    a, b, svg = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "s.svg"
    args = ["sweep", "--d", "3", "--count", "3", "--seed", "5"]
    assert main(args + ["--out", str(a), "--svg", str(svg)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    body = lambda p: [ln for ln in p.read_text().splitlines() if not ln.startswith("#")]
    assert body(a) == body(b)
    rows = read_sweep_csv(a.read_text())
    assert [r["index"] for r in rows] == [0, 1, 2]
    for r in rows:
        assert r["status"] == "ok"
        assert r["weight_bound"] <= r["cmin"] + 1e-6
        assert 0 <= r["W"] <= 1
    assert svg.read_text().startswith("<svg") and svg.read_text().count("<circle") == 6


def test_sweep_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PHASECOH_SEED", "5")
    a = tmp_path / "a.csv"
    assert main(["sweep", "--d", "2", "--count", "2", "--ensemble", "pure", "--out", str(a)]) == EXIT_OK
    assert "seed=5" in a.read_text().splitlines()[0]
    rows = read_sweep_csv(a.read_text())
    assert all(abs(r["W"] - 1) < 1e-6 for r in rows)
    monkeypatch.setenv("PHASECOH_SEED", "x")
    assert main(["sweep", "--d", "2", "--count", "1"]) == EXIT_CONFIG


def test_verify_subset(capsys):
    assert main(["verify", "--only", "textbook-qpe,compilation"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert all(ln.startswith("[PASS]") for ln in out[:2])
    assert {ln.split()[2] for ln in out[:2]} == {"textbook-qpe", "compilation"}
    assert out[-1] == "2/2 checks passed"


def test_verify_tolerance_override(capsys):
    assert main(["verify", "--only", "cost-matrix", "--tol", "1e-30"]) == EXIT_VERIFY
    assert capsys.readouterr().out.startswith("[FAIL]")
