import json

import numpy as np
import pytest

from pseudodisc import __version__
from pseudodisc.basis import DiscMap
from pseudodisc.cli import ExpressionError, main, parse_disc, parse_expression, run
from pseudodisc.structure import PolynomialStructure

# -- expressions ---------------------------------------------------------------


def test_parse_zeta():
    assert parse_expression("zeta").tolist() == [[0], [1]]
    assert parse_expression("z").tolist() == [[0], [1]]


def test_parse_conj():
    c = parse_expression("conj(zeta)")
    assert c.shape == (1, 2) and c[0, 1] == 1


def test_parse_polynomial():
    c = parse_expression("zeta + 0.05*conj(zeta)^2 - 2*i*zeta**2*conj(zeta)/4")
    ref = np.zeros((3, 3), complex)
    ref[1, 0] = 1
    ref[0, 2] = 0.05
    ref[2, 1] = -0.5j
    assert np.abs(c - ref).max() == 0


def test_parse_conj_of_complex_coefficient():
    # conj(i ζ) = -i ζ̄
    c = parse_expression("conj(i*zeta)")
    assert c[0, 1] == -1j


def test_parse_disc_components():
    u = parse_disc("zeta; 0.001*conj(zeta); 0")
    assert isinstance(u, DiscMap) and u.n == 3
    assert u.coeffs[0, 1, 0] == 1 and u.coeffs[1, 0, 1] == 0.001 and not np.any(u.coeffs[2])


@pytest.mark.parametrize("bad", ["zeta**0.5", "zeta/conj(zeta)", "sin(zeta)", "w", "zeta +", "zeta/0", "zeta**-1"])
def test_parse_rejects(bad):
    with pytest.raises(ExpressionError):
        parse_expression(bad)


# -- commands ------------------------------------------------------------------


def test_solve_standard():
    code, rep, text = run(["solve", "--initial", "zeta+0.05*conj(zeta)^2"])
    assert code == 0 and rep["status"] == "ok"
    nr = rep["result"]["newton"]
    assert nr["iterations"] == 1 and nr["residuals"][-1] < 1e-10 and nr["bound_ok"]
    assert rep["version"] == __version__ and rep["command"] == "solve"
    assert json.loads(text)["result"]["degree"] == 8
    assert text.endswith("}\n")


def test_solve_holomorphic_zero_residual():
    code, rep, _ = run(["solve", "--initial", "zeta"])
    assert code == 0 and rep["result"]["newton"]["residuals"] == [0.0]


def test_solve_from_file(tmp_path):
    f = tmp_path / "phi.json"
    f.write_text(parse_disc("zeta + 0.01*conj(zeta)").to_json())
    code, rep, _ = run(["solve", "--initial", str(f)])
    assert code == 0 and rep["result"]["newton"]["converged"]


def test_solve_structure_file(tmp_path):
    f = tmp_path / "J.json"
    f.write_text(PolynomialStructure(1, {(0, 0): [(0.1, (0,), (1,))]}).to_json())
    code, rep, _ = run(["solve", "--structure", str(f), "--initial", "zeta+0.01*conj(zeta)^2"])
    assert code == 0
    assert max(rep["result"]["newton"]["contraction_ratios"]) < 0.75


def test_csv_output(tmp_path):
    code, _, _ = run(["solve", "--initial", "zeta+0.05*conj(zeta)", "--csv-dir", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "residuals.csv").read_text().splitlines()
    assert lines[0] == "iteration,residual" and len(lines) == 3


def test_report_file(tmp_path):
    out = tmp_path / "r.json"
    code, _, text = run(["norms", "--map", "zeta", "--report", str(out)])
    assert code == 0 and out.read_text() == text


def test_kernel_r6():
    code, rep, _ = run(["kernel", "--structure", "builtin:example_r6", "--initial", "zeta;0;0", "--degree", "12"])
    assert code == 0
    assert rep["result"]["kernel_dim"] == 2 and rep["result"]["gap"] > 1e-3


def test_cg_verify(tmp_path):
    code, rep, _ = run(["cg-verify", "--csv-dir", str(tmp_path)])
    assert code == 0 and rep["result"]["passed"]
    assert rep["result"]["dbar_T_coeff_error"] < 1e-12 and rep["result"]["max_rel_err"] < 1e-6
    assert len((tmp_path / "cg_points.csv").read_text().splitlines()) == 11


def test_norms_table():
    code, rep, _ = run(["norms", "--map", "1", "--p", "4"])
    assert code == 0
    assert rep["result"]["norms"]["Lp/full"] == pytest.approx(np.pi**0.25, rel=1e-14)
    assert len(rep["result"]["norms"]) == 20


def test_example_r6_command(tmp_path):
    code, rep, _ = run(["example-r6", "--csv-dir", str(tmp_path)])
    assert code == 0
    res = rep["result"]
    assert res["kernel_dim"] == 2 and res["certificate"]["passed"]
    assert res["series"]["b"][1:4] == [[-1, 1], [1, 9], [1, 135]]
    assert res["ode_residual"]["psi1"] < 1e-12 and res["ode_residual"]["psi2"] < 1e-9
    assert res["perturbed_coeff31_-1.1"]["kernel_dim"] == 0
    for name in ("b_coeffs.csv", "lambdas.csv", "singular_values.csv"):
        assert (tmp_path / name).is_file()


# -- exit codes ----------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--initial", "zeta**0.5"],
        ["solve", "--initial", "zeta", "--structure", "missing.json"],
        ["solve", "--initial", "missing.json"],
        ["solve", "--initial", "zeta", "--p", "2"],
        ["solve", "--initial", "zeta;0", "--structure", "builtin:example_r6"],
        ["solve", "--initial", "zeta^20", "--degree", "8"],
    ],
)
def test_invalid_input_exit_2(argv, capsys):
    assert main(argv) == 2
    rep = json.loads(capsys.readouterr().out)
    assert rep["status"] == "invalid_input" and rep["error"]


def test_numerical_failure_exit_3():
    code, rep, _ = run(["solve", "--initial", "zeta+0.1*conj(zeta)", "--maxiter", "0"])
    assert code == 3 and rep["status"] == "numerical_failure"
    # the partial report is kept
    assert rep["result"]["newton"]["iterations"] == 0


def test_threads_env(monkeypatch):
    monkeypatch.setenv("PSEUDODISC_THREADS", "1")
    assert run(["norms", "--map", "zeta"])[0] == 0
    monkeypatch.setenv("PSEUDODISC_THREADS", "zero")
    assert run(["norms", "--map", "zeta"])[0] == 2


# -- determinism ---------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--initial", "zeta+0.05*conj(zeta)^2", "--seed", "7"],
        ["kernel", "--structure", "builtin:example_r6", "--initial", "zeta;0;0", "--degree", "12"],
        ["glue", "--u1", "zeta+0.2*zeta^2", "--u2", "zeta+0.2*zeta^2+0.001", "--tau", "0.3", "--eps", "0.05"],
    ],
)
def test_byte_identical_reports(argv):
    first = run(argv)
    second = run(argv)
    assert first[0] == 0
    assert first[2] == second[2]
