import json
import math

import numpy as np
import pytest

import statechar as sc
from statechar.cli import main
from statechar.io import dumps_canonical, gen_instance, instance_hash

E = math.e

SYM2X2 = {
    "characteristics": ["a", "b"],
    "states": ["lo", "hi"],
    "utility": [[1.0, 0.0], [0.0, 1.0]],
    "phi": [0.5, 0.5],
    "mu": [0.5, 0.5],
    "alpha": 0.5,
    "lambda": 1.0,
}


@pytest.fixture
def sym_file(tmp_path):
    path = tmp_path / "sym.json"
    path.write_text(json.dumps(SYM2X2))
    return str(path)


def write_instance(tmp_path, payload, name="inst.json"):
    path = tmp_path / name
    path.write_text(dumps_canonical(payload))
    return str(path)


# --- parsing -----------------------------------------------------------------

def test_parse_minimal_1x1(tmp_path, capsys):
    path = write_instance(tmp_path, {
        "characteristics": ["only"], "states": ["s"], "utility": [[2.0]],
        "phi": [1.0], "mu": [1.0], "alpha": 0.5, "lambda": 1.0})
    assert main(["solve", "--instance", path]) == 0
    out = capsys.readouterr().out
    assert "U* = 2" in out


def test_parse_matches_fixture(sym_file, sym2x2):
    inst, _ = sc.load_instance(sym_file)
    assert inst.characteristic_labels == sym2x2.characteristic_labels
    assert inst.state_labels == sym2x2.state_labels
    np.testing.assert_array_equal(inst.utility, sym2x2.utility)
    np.testing.assert_array_equal(inst.phi, sym2x2.phi)
    assert (inst.alpha, inst.lam) == (sym2x2.alpha, sym2x2.lam)


def test_parse_alpha_zero_exit_2(tmp_path, capsys):
    payload = dict(SYM2X2, alpha=0.0)
    path = write_instance(tmp_path, payload)
    assert main(["solve", "--instance", path]) == 2
    assert "unique" in capsys.readouterr().err


def test_parse_missing_field_exit_2(tmp_path, capsys):
    payload = {k: v for k, v in SYM2X2.items() if k != "phi"}
    path = write_instance(tmp_path, payload)
    assert main(["solve", "--instance", path]) == 2
    assert "phi" in capsys.readouterr().err


def test_parse_shape_mismatch_exit_2(tmp_path, capsys):
    payload = dict(SYM2X2, utility=[[1.0, 0.0]])
    path = write_instance(tmp_path, payload)
    assert main(["solve", "--instance", path]) == 2
    assert "utility" in capsys.readouterr().err


def test_parse_bad_json_exit_2(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{ not json")
    assert main(["solve", "--instance", str(path)]) == 2
    assert "JSON" in capsys.readouterr().err


def test_missing_file_exit_2(tmp_path):
    assert main(["solve", "--instance", str(tmp_path / "absent.json")]) == 2


# --- solve -------------------------------------------------------------------

def test_solve_symmetric_report(sym_file, tmp_path, capsys):
    report_path = str(tmp_path / "report.json")
    assert main(["solve", "--instance", sym_file, "--report", report_path]) == 0
    report = json.loads(open(report_path).read())
    assert report["command"] == "solve"
    assert report["solution"]["U_star"] == pytest.approx(math.log((1 + E) / 2),
                                                         abs=1e-6)
    assert report["solution"]["converged"] is True
    assert report["diagnostics"]["all_passed"] is True
    assert "U*" in capsys.readouterr().out


def test_solve_flat_returns_prior(tmp_path):
    payload = dict(SYM2X2, utility=[[0.0, 0.0], [0.0, 0.0]],
                   phi=[0.25, 0.75])
    path = write_instance(tmp_path, payload)
    report_path = str(tmp_path / "r.json")
    assert main(["solve", "--instance", path, "--report", report_path]) == 0
    report = json.loads(open(report_path).read())
    assert report["solution"]["nu_star"] == [0.25, 0.75]


def test_solve_deterministic_reports(sym_file, tmp_path):
    r1, r2 = str(tmp_path / "r1.json"), str(tmp_path / "r2.json")
    assert main(["solve", "--instance", sym_file, "--report", r1]) == 0
    assert main(["solve", "--instance", sym_file, "--report", r2]) == 0
    assert open(r1, "rb").read() == open(r2, "rb").read()


def test_solve_report_round_trips(sym_file, tmp_path):
    report_path = str(tmp_path / "r.json")
    main(["solve", "--instance", sym_file, "--report", report_path])
    text = open(report_path).read()
    assert dumps_canonical(json.loads(text)) == text


def test_solve_non_convergence_exit_3(tmp_path):
    payload = gen_instance(11, 3, 3, alpha=0.25)
    path = write_instance(tmp_path, payload)
    report_path = str(tmp_path / "r.json")
    assert main(["solve", "--instance", path, "--report", report_path,
                 "--max-iter", "2"]) == 3
    report = json.loads(open(report_path).read())
    assert report["solution"]["converged"] is False


def test_solve_timings_flag(sym_file, tmp_path):
    report_path = str(tmp_path / "r.json")
    main(["solve", "--instance", sym_file, "--report", report_path, "--timings"])
    report = json.loads(open(report_path).read())
    assert report["timings"]["seconds"] > 0


# --- bridge ------------------------------------------------------------------

def test_bridge_flat_one_sweep(tmp_path, capsys):
    payload = dict(SYM2X2, utility=[[0.0, 0.0], [0.0, 0.0]])
    inst_path = write_instance(tmp_path, payload)
    nu_path = tmp_path / "nu.json"
    nu_path.write_text(json.dumps({"nu": [0.5, 0.5]}))
    report_path = str(tmp_path / "r.json")
    assert main(["bridge", "--instance", inst_path, "--nu", str(nu_path),
                 "--report", report_path]) == 0
    report = json.loads(open(report_path).read())
    assert report["bridge"]["iterations"] == 1
    assert report["bridge"]["value_V"] == pytest.approx(0.0, abs=1e-12)


def test_bridge_consistent_with_solve(sym_file, tmp_path):
    solve_report = str(tmp_path / "s.json")
    main(["solve", "--instance", sym_file, "--report", solve_report])
    nu_star = json.loads(open(solve_report).read())["solution"]["nu_star"]
    nu_path = tmp_path / "nu.json"
    nu_path.write_text(json.dumps(nu_star))
    bridge_report = str(tmp_path / "b.json")
    assert main(["bridge", "--instance", sym_file, "--nu", str(nu_path),
                 "--report", bridge_report]) == 0
    v = json.loads(open(bridge_report).read())["bridge"]["value_V"]
    u = json.loads(open(solve_report).read())["solution"]["U_star"]
    assert v == pytest.approx(u, abs=1e-8)


def test_bridge_tiny_max_iter_exit_3(tmp_path):
    payload = gen_instance(11, 3, 3, alpha=0.5)
    inst_path = write_instance(tmp_path, payload)
    nu_path = tmp_path / "nu.json"
    nu_path.write_text(json.dumps([0.2, 0.5, 0.3]))
    report_path = str(tmp_path / "r.json")
    assert main(["bridge", "--instance", inst_path, "--nu", str(nu_path),
                 "--report", report_path, "--max-iter", "1"]) == 3
    assert json.loads(open(report_path).read())["bridge"]["converged"] is False


def test_bridge_wrong_length_nu_exit_2(sym_file, tmp_path):
    nu_path = tmp_path / "nu.json"
    nu_path.write_text(json.dumps([0.2, 0.5, 0.3]))
    assert main(["bridge", "--instance", sym_file, "--nu", str(nu_path)]) == 2


# --- entry -------------------------------------------------------------------

def test_entry_no_entry_pair(sym_file, tmp_path):
    report_path = str(tmp_path / "r.json")
    assert main(["entry", "--instance", sym_file, "--entrant", sym_file,
                 "--report", report_path]) == 0
    report = json.loads(open(report_path).read())
    assert report["passed"] is True
    assert report["informative_pairs"] == 0


def test_entry_alpha_recovery(tmp_path):
    payload = gen_instance(21, 3, 3, alpha=0.7)
    base_path = write_instance(tmp_path, payload, "base.json")
    shifted = dict(payload, phi=[0.5, 0.3, 0.2])
    entrant_path = write_instance(tmp_path, shifted, "entrant.json")
    report_path = str(tmp_path / "r.json")
    assert main(["entry", "--instance", base_path, "--entrant", entrant_path,
                 "--report", report_path]) == 0
    report = json.loads(open(report_path).read())
    assert report["alpha_median"] == pytest.approx(0.7, abs=1e-4)
    assert report["passed"] is True


def test_entry_mismatch_exit_2(tmp_path, sym_file):
    other = dict(SYM2X2, mu=[0.3, 0.7])
    other_path = write_instance(tmp_path, other)
    assert main(["entry", "--instance", sym_file, "--entrant", other_path]) == 2


# --- oracle ------------------------------------------------------------------

def test_oracle_symmetric(sym_file, tmp_path):
    report_path = str(tmp_path / "r.json")
    assert main(["oracle", "--instance", sym_file, "--report", report_path]) == 0
    report = json.loads(open(report_path).read())
    assert report["oracle"]["U_solver"] == pytest.approx(
        report["oracle"]["U_oracle"], abs=1e-6)


def test_oracle_guard_exit_2(tmp_path):
    payload = gen_instance(0, 4, 4, alpha=0.5)
    path = write_instance(tmp_path, payload)
    assert main(["oracle", "--instance", path]) == 2


# --- diagnose ----------------------------------------------------------------

def test_diagnose_solution_mode(sym_file, tmp_path):
    report_path = str(tmp_path / "r.json")
    assert main(["diagnose", "--instance", sym_file,
                 "--report", report_path]) == 0
    report = json.loads(open(report_path).read())
    assert report["diagnostics"]["mode"] == "solution"
    assert report["diagnostics"]["all_passed"] is True


def test_diagnose_coupling_mode(sym_file, tmp_path):
    coupling_path = tmp_path / "c.json"
    coupling_path.write_text(json.dumps([[0.25, 0.25], [0.25, 0.25]]))
    report_path = str(tmp_path / "r.json")
    assert main(["diagnose", "--instance", sym_file, "--coupling",
                 str(coupling_path), "--report", report_path]) == 0
    report = json.loads(open(report_path).read())
    assert report["diagnostics"]["mode"] == "coupling"
    assert report["diagnostics"]["gibbs_deviation"] == pytest.approx(0.5, abs=1e-9)
    # product coupling: U = E[u] = 1/2 and f(phi) = log((1+e)/2)
    assert report["diagnostics"]["jensen_gap"] == pytest.approx(
        math.log((1 + E) / 2) - 0.5, abs=1e-9)


# --- gen ---------------------------------------------------------------------

def test_gen_deterministic(tmp_path):
    p1, p2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    assert main(["gen", "--seed", "1", "--n", "3", "--m", "2", "--out", p1]) == 0
    assert main(["gen", "--seed", "1", "--n", "3", "--m", "2", "--out", p2]) == 0
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_gen_seed_changes_content(tmp_path):
    p1, p2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    main(["gen", "--seed", "1", "--n", "3", "--m", "2", "--out", p1])
    main(["gen", "--seed", "2", "--n", "3", "--m", "2", "--out", p2])
    assert open(p1).read() != open(p2).read()


def test_gen_output_validates(tmp_path):
    path = str(tmp_path / "g.json")
    main(["gen", "--seed", "5", "--n", "4", "--m", "3", "--out", path])
    inst, raw = sc.load_instance(path)
    assert inst.n == 4 and inst.m == 3
    assert instance_hash(raw)


def test_gen_then_solve(tmp_path):
    path = str(tmp_path / "g.json")
    main(["gen", "--seed", "5", "--n", "3", "--m", "3", "--out", path])
    assert main(["solve", "--instance", path]) == 0
