import json

import numpy as np
import pytest

import chaplygin.checks
from chaplygin.cli import main
from chaplygin.scenario import ScenarioParseError, ScenarioValidationError, parse_scenario
from chaplygin.son import StructureTensor, structure_constants

SCENARIO = """\
n: 3
inertia: {principal3: [1.0, 1.5, 2.0]}
initial:
  s0: [0.1, -0.2, 0.3]
  u0: [1.0, 0.2, 0.5]
T: 0.2
dt: 0.001
form: omega_nh
reparam: {reparam}
seed: 0
"""


def write(tmp_path, text, name="sc.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def last_error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_parse_valid_scenario():
    sc = parse_scenario(SCENARIO.replace("{reparam}", "false"))
    assert sc.n == 3 and sc.form_tag == "OMEGA_NH"
    assert np.allclose(np.diag(sc.inertia.matrix), [1.0, 1.5, 2.0])
    assert parse_scenario("n: 4\ninertia: identity\ninitial: {u0: [1, 0, 0, 0, 0, 1]}\nT: 1\ndt: 0.5\n").s0 == (0.0,) * 6


@pytest.mark.parametrize("text", [
    "n: [3\n",
    "- 1\n- 2\n",
    "n: 3\ninertia: identity\ninitial: {u0: [1, 0, 0]}\nT: 1\n",
    "n: 3\ninertia: identity\ninitial: {u0: [1, 0, 0]}\nT: 1\ndt: 0.1\ncolour: red\n",
    "n: 3\ninertia: identity\ninitial: {u0: [1, x, 0]}\nT: 1\ndt: 0.1\n",
    "n: 3.5\ninertia: identity\ninitial: {u0: [1, 0, 0]}\nT: 1\ndt: 0.1\n",
])
def test_parse_errors(text):
    with pytest.raises(ScenarioParseError):
        parse_scenario(text)


@pytest.mark.parametrize("text", [
    "n: 2\ninertia: identity\ninitial: {u0: [1]}\nT: 1\ndt: 0.1\n",
    "n: 3\ninertia: identity\ninitial: {u0: [1, 0]}\nT: 1\ndt: 0.1\n",
    "n: 3\ninertia: identity\ninitial: {u0: [1, 0, 0]}\nT: 1\ndt: -0.1\n",
    "n: 3\ninertia: identity\ninitial: {u0: [1, 0, 0]}\nT: 1\ndt: 0.3\n",
    "n: 3\ninertia: {diagonal: [1, -1, 1]}\ninitial: {u0: [1, 0, 0]}\nT: 1\ndt: 0.1\n",
    "n: 4\ninertia: {principal3: [1, 1, 1]}\ninitial: {u0: [1, 0, 0, 0, 0, 0]}\nT: 1\ndt: 0.1\n",
    "n: 3\ninertia: identity\ninitial: {u0: [1, 0, 0]}\nT: 1\ndt: 0.1\nform: omega_s\n",
])
def test_validation_errors(text):
    with pytest.raises(ScenarioValidationError):
        parse_scenario(text)


def test_run_writes_outputs(tmp_path, capsys):
    path = write(tmp_path, SCENARIO.replace("{reparam}", "true"))
    out = tmp_path / "out"
    assert main(["run", path, "--out", str(out)]) == 0
    report = json.loads((out / "sc.report.json").read_text())
    assert report["schema"] == "chaplygin-run-report"
    assert report["drifts"]["H_c"] <= 1e-10
    assert report["oracle"]["passed"]
    assert report["reparametrization"]["passed"]
    assert report["order_estimate"]["value"] > 3.0
    lines = (out / "sc.trajectory.csv").read_text().splitlines()
    assert lines[0].split(",")[:2] == ["t", "s11"]
    assert "u_Y12" in lines[0] and "J_Y12" in lines[0] and lines[0].endswith("g2")
    assert len(lines) == 202
    assert "straight line False" in capsys.readouterr().out


def test_run_is_bit_identical(tmp_path):
    path = write(tmp_path, SCENARIO.replace("{reparam}", "false"))
    main(["run", path, "--out", str(tmp_path / "a")])
    main(["run", path, "--out", str(tmp_path / "b")])
    for name in ("sc.trajectory.csv", "sc.report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_homogeneous_flags_straight_line(tmp_path):
    text = "n: 4\ninertia: identity\ninitial: {u0: [0.5, -1, 0.3, 1, 0, 2]}\nT: 0.1\ndt: 0.001\n"
    main(["run", write(tmp_path, text), "--out", str(tmp_path)])
    report = json.loads((tmp_path / "sc.report.json").read_text())
    assert report["straight_line"]["flag"] is True


def test_out_dir_from_environment(tmp_path, monkeypatch):
    path = write(tmp_path, SCENARIO.replace("{reparam}", "false"))
    monkeypatch.setenv("CHAPLYGIN_OUT", str(tmp_path / "env"))
    assert main(["run", path]) == 0
    assert (tmp_path / "env" / "sc.report.json").exists()
    assert main(["run", path, "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "sc.report.json").exists()


def test_run_parse_error_exit_code(tmp_path, capsys):
    assert main(["run", write(tmp_path, "n: [3\n")]) == 2
    assert last_error(capsys)["error"] == "parse"
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2


def test_run_validation_exit_code(tmp_path, capsys):
    text = "n: 3\ninertia: identity\ninitial: {u0: [1, 0]}\nT: 1\ndt: 0.1\n"
    assert main(["run", write(tmp_path, text)]) == 3
    err = last_error(capsys)
    assert err["error"] == "validation" and "coefficients" in err["reason"]


def test_run_guard_exit_code(tmp_path, capsys):
    text = ("n: 3\ninertia: {principal3: [1, 2, 3]}\n"
            "initial: {s0: [0.3, 0.1, -0.2], u0: [20, -15, 30]}\nT: 5\ndt: 0.5\n")
    assert main(["run", write(tmp_path, text), "--out", str(tmp_path)]) == 4
    assert last_error(capsys)["error"] == "guard"


def test_verify_unknown_suite(capsys):
    assert main(["verify", "everything"]) == 2
    assert "unknown suite" in last_error(capsys)["reason"]


def test_verify_bad_n_list():
    with pytest.raises(SystemExit) as exc:
        main(["verify", "algebra", "--n", "2"])
    assert exc.value.code == 2


def test_verify_algebra_passes(tmp_path, capsys):
    assert main(["verify", "algebra", "--n", "3,4", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[-2].startswith("PASS")
    data = json.loads((tmp_path / "verify-algebra.json").read_text())
    assert data["passed"] is True


def test_verify_detects_corrupted_structure(monkeypatch, capsys):
    def corrupted(n):
        good = structure_constants(n)
        C = np.array(good.C)
        C[0, 1, 3] += 0.05
        C[1, 0, 3] -= 0.05
        return StructureTensor(good.basis, C)

    monkeypatch.setattr(chaplygin.checks, "structure_provider", corrupted)
    assert main(["verify", "algebra", "--n", "4"]) == 1
    out = capsys.readouterr().out
    failed = [line for line in out.splitlines() if line.startswith("FAIL")]
    assert any("structure_jacobi" in line for line in failed)
    assert out.splitlines()[-1].startswith("FAIL: suite algebra")
