import json
import math
import subprocess
import sys

import pytest

from minperiod.cli import RunConfig, main
from minperiod.errors import InputError

TWO_PI = 2 * math.pi


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out), err


@pytest.fixture
def vec_file(tmp_path):
    p = tmp_path / "v.json"
    p.write_text("[3, 4]")
    return str(p)


def test_norm_l2(capsys, vec_file):
    code, out, _ = run(capsys, "norm", "--vec", vec_file, "--norm", '{"kind":"lp","p":2}')
    assert code == 0 and out.strip() == "5"


def test_norm_linf(capsys):
    code, out, _ = run(capsys, "norm", "--vec", "[1, -2]", "--norm", '{"kind":"linf"}')
    assert code == 0 and out.strip() == "2"


def test_norm_json_format(capsys):
    code, data, _ = run_json(capsys, "norm", "--vec", "[[3, 4]]", "--format", "json")
    assert code == 0 and data == {"value": 5.0}


def test_norm_malformed_exponent(capsys, vec_file):
    code, out, err = run(capsys, "norm", "--vec", vec_file, "--norm", '{"kind":"lp","p":0.5}')
    assert code == 2 and "MalformedNorm" in err and out == ""


def test_induced_rotation(capsys):
    code, data, _ = run_json(capsys, "induced", "--matrix", "[[0,2],[-2,0]]")
    assert code == 0 and data["value"] == 2.0 and data["exact"] is True


def test_induced_non_normal(capsys):
    _, data, _ = run_json(capsys, "induced", "--matrix", "[[0,1],[-4,0]]")
    assert data["value"] == pytest.approx(4.0, abs=1e-12)


def test_induced_fractional_exponent(capsys):
    code, data, _ = run_json(capsys, "induced", "--matrix", "[[1,0,0],[0,1,0],[0,0,1]]",
                             "--norm", '{"kind":"lp","p":1.7}', "--restarts", "16")
    assert code == 0 and abs(data["value"] - 1) <= 1e-6 and data["exact"] is False
    assert data["restarts_used"] == 16


def test_spectrum_json_and_csv(capsys):
    _, data, _ = run_json(capsys, "spectrum", "--matrix", "[[0,3],[-3,0]]")
    assert data["eigenvalues"] == [[0.0, -3.0], [0.0, 3.0]]
    _, out, _ = run(capsys, "spectrum", "--matrix", "[[0,3],[-3,0]]", "--format", "csv")
    assert out.splitlines() == ["index,re,im,modulus", "0,0,-3,3", "1,0,3,3"]


def test_attainment(capsys):
    _, data, _ = run_json(capsys, "attainment", "--matrix", "[[0,1],[-4,0]]")
    assert data["attained"] is False and data["rho"] == pytest.approx(2.0, abs=1e-8)
    _, data, _ = run_json(capsys, "attainment", "--matrix", "[[0,1],[-1,0]]",
                          "--tol-attainment", "1e-9")
    assert data["attained"] is True and data["tol"] == 1e-9


def test_simulate_csv(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--system", '{"type":"planar","L":1}',
                       "--t-end", "0.02", "--h", "0.01", "--out", str(tmp_path))
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t,x_0_re,x_0_im,x_1_re,x_1_im" and len(lines) == 4
    assert (tmp_path / "trajectory.csv").read_text() == out


def test_simulate_step_too_large(capsys):
    code, _, err = run(capsys, "simulate", "--system", '{"type":"planar","L":1}',
                       "--t-end", "1", "--h", "0.25")
    assert code == 2 and "StepTooLarge" in err


def test_period(capsys):
    code, data, _ = run_json(capsys, "period", "--system", '{"type":"planar","L":3}',
                             "--x0", "[1, 0]")
    assert code == 0 and abs(data["T"] - TWO_PI / 3) <= 1e-6
    assert data["method"] == "return_map"


def test_period_constant_is_numeric_error(capsys):
    code, _, err = run(capsys, "period", "--system", '{"type":"matrix","A":[[0,0],[0,0]]}',
                       "--x0", "[1, 1]")
    assert code == 3 and "ConstantSolution" in err


def test_verify_bound_planar(capsys, tmp_path):
    spec = tmp_path / "planar.json"
    spec.write_text('{"type": "planar", "L": 1}')
    out_dir = tmp_path / "out"
    code, data, _ = run_json(capsys, "verify-bound", "--system", str(spec),
                             "--out", str(out_dir))
    assert code == 0 and abs(data["margin"]) <= 1e-3
    assert json.loads((out_dir / "report.json").read_text()) == data
    header = (out_dir / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,x_0_re,x_0_im,x_1_re,x_1_im"


def test_verify_bound_antisymmetric(capsys):
    code, data, _ = run_json(capsys, "verify-bound", "--system",
                             '{"type":"random_antisym","n":4,"seed":7}')
    assert code == 0 and data["margin"] >= -1e-3


def test_verify_bound_zero_matrix(capsys):
    code, data, err = run_json(capsys, "verify-bound", "--system",
                               '{"type":"matrix","A":[[0,0],[0,0]]}')
    assert code == 0 and data["vacuous"] is True
    assert "bound vacuously satisfied" in data["message"] and "warning" in err


def test_verify_bound_failing_check_exit_code(capsys):
    # a negative report tolerance turns the attained floor into a failed check
    code, data, _ = run_json(capsys, "verify-bound", "--system", '{"type":"planar","L":1}',
                             "--tol-report", "-0.5")
    assert code == 1 and data["passed"] is False


def test_verify_bound_custom_shifts(capsys):
    _, data, _ = run_json(capsys, "verify-bound", "--system", '{"type":"planar","L":1}',
                          "--shifts", "[0.5]")
    assert {c["name"].split("[")[1].split(",")[0] for c in data["checks"] if "[" in c["name"]} \
        == {"tau=1/2T"}


def test_lemma1_subcommand(capsys):
    code, data, _ = run_json(capsys, "lemma1", "--system",
                             '{"type":"complex_diagonal","L":1,"n":1}', "--tau", "0.25")
    assert code == 0 and data["passed"] and data["max_violation"] <= 1e-9
    code, data, _ = run_json(capsys, "lemma1", "--system", '{"type":"planar","L":1}')
    assert code == 0 and data["flag"] == "HypothesisMismatch" and data["asserted"] is False


def test_wirtinger_subcommand(capsys):
    code, data, _ = run_json(capsys, "wirtinger", "--system",
                             '{"type":"matrix","A":[[0,1],[-4,0]]}', "--component", "1")
    assert code == 0 and data["ratio"] <= 1 + 1e-6 and data["zero_mean"]


def test_lipschitz_estimate(capsys):
    code, data, _ = run_json(capsys, "lipschitz-est", "--system",
                             '{"type":"matrix","A":[[0,2],[-2,0]]}', "--pairs", "1000")
    assert code == 0 and 1.9 <= data["estimate"] <= 2.0 and data["lower_bound"] is True


def test_search_files(capsys, tmp_path):
    code, data, _ = run_json(capsys, "search", "--count", "6", "--seed", "3",
                             "--out", str(tmp_path))
    assert code == 0 and data["min_k"] >= TWO_PI - 1e-3 and data["count"] == 6
    rows = (tmp_path / "distribution.csv").read_text().splitlines()
    assert rows[0] == "draw_index,k,T,L,margin,family" and len(rows) == 7
    assert json.loads((tmp_path / "summary.json").read_text()) == data


def test_search_family_name_and_csv(capsys):
    code, out, _ = run(capsys, "search", "--ensemble", "skew2", "--count", "3",
                       "--format", "csv")
    assert code == 0
    assert [r.split(",")[-1] for r in out.splitlines()[1:]] == ["skew2"] * 3


def test_output_is_byte_identical(capsys):
    argv = ["verify-bound", "--system", '{"type":"random_antiherm","n":2,"seed":1}',
            "--seed", "9"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b
    _, a, _ = run(capsys, "search", "--count", "4", "--seed", "5")
    _, b, _ = run(capsys, "search", "--count", "4", "--seed", "5", "--workers", "2")
    assert a == b


# --- config and argument handling ----------------------------------------------------

def test_config_supplies_inputs_and_tolerances(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "verify-bound",
                               "inputs": {"system": {"type": "planar", "L": 2}},
                               "tolerances": {"report": 0.01}, "seed": 5}))
    code, data, _ = run_json(capsys, "verify-bound", "--config", str(cfg))
    assert code == 0 and data["seed"] == 5
    bound = next(c for c in data["checks"] if c["name"] == "bound")
    assert bound["tol"] == 0.01
    # flags win over the file
    _, data, _ = run_json(capsys, "verify-bound", "--config", str(cfg), "--seed", "6")
    assert data["seed"] == 6


@pytest.mark.parametrize("cfg", [
    {"command": "norm", "tolerence": {}},
    {"tolerances": {"reprot": 0.1}},
    {"command": "norm", "inputs": {"vector": [1]}},
    {"command": "fly"},
    {"format": "xml"},
    [1],
])
def test_config_is_strict(cfg):
    with pytest.raises(InputError):
        RunConfig.from_json(cfg)


def test_config_command_mismatch(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text('{"command": "spectrum"}')
    code, _, err = run(capsys, "norm", "--vec", "[1]", "--config", str(cfg))
    assert code == 2 and "config is for" in err


def test_missing_required_input(capsys):
    code, _, err = run(capsys, "induced")
    assert code == 2 and "--matrix" in err


def test_unknown_subcommand(capsys):
    assert main(["bogus"]) == 2


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == 0
    assert "verify-bound" in capsys.readouterr().out


def test_malformed_system(capsys):
    code, _, err = run(capsys, "period", "--system", '{"type":"planar","L":-1}')
    assert code == 2 and "NonpositiveL" in err
    code, _, err = run(capsys, "period", "--system", "{broken")
    assert code == 2


def test_x0_dimension_checked(capsys):
    code, _, err = run(capsys, "period", "--system", '{"type":"planar","L":1}',
                       "--x0", "[1, 0, 0]")
    assert code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "minperiod", "norm", "--vec", "[6, 8]"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.strip() == "10"
