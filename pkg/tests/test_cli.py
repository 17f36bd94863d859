import json
import subprocess
import sys

import pytest

from randhyp.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_test_subcommand_json(tmp_path, capsys):
    f = tmp_path / "x.csv"
    f.write_text("# sample\n1.0\n2.0\n")
    code, out, _ = run(capsys, "test", "--sample", str(f), "--group", "sign_change", "--statistic", "mean",
                       "--level", "0.25")
    assert code == 0
    obj = json.loads(out)
    assert obj["phi"] == 1.0 and obj["p_value"] == 0.25 and obj["M"] == 4
    assert obj["group"]["kind"] == "sign_change"


def test_test_subcommand_csv(tmp_path, capsys):
    f = tmp_path / "x.csv"
    f.write_text("1\n-2\n3\n")
    code, out, _ = run(capsys, "test", "--sample", str(f), "--output", "csv")
    assert code == 0
    assert out.splitlines()[0].startswith("phi,p_value")


def test_invalid_sample_exit_two(tmp_path, capsys):
    f = tmp_path / "x.csv"
    f.write_text("1\nnan\n")
    code, _, err = run(capsys, "test", "--sample", str(f))
    assert code == 2 and "error" in err


def test_cap_exit_three(tmp_path, capsys):
    f = tmp_path / "x.csv"
    f.write_text("\n".join(str(i) for i in range(15)))
    code, _, _ = run(capsys, "test", "--sample", str(f), "--cap", "1000")
    assert code == 3


def test_check_null_satisfied(capsys):
    spec = json.dumps({"alphabet": [-1, 0, 1], "family": "symmetric"})
    code, out, _ = run(capsys, "check-null", "--spec", spec, "--n", "1")
    assert code == 0
    assert json.loads(out)["status"] == "satisfied"


def test_check_null_ledger_and_budget(tmp_path, capsys):
    spec = json.dumps({"alphabet": [1, 2, 3, 4, 5], "family": "moment", "t": 1, "beta": 3})
    ledger = tmp_path / "ledger.csv"
    code, out, _ = run(capsys, "check-null", "--spec", spec, "--n", "2", "--ledger", str(ledger))
    assert code == 0
    assert json.loads(out)["status"] == "not_satisfied"
    assert len(ledger.read_text().splitlines()) == 131
    code, out, _ = run(capsys, "check-null", "--spec", spec, "--n", "2", "--budget", "3")
    assert code == 3
    assert json.loads(out)["status"] == "inconclusive"


def test_check_null_round_trips_own_output(tmp_path, capsys):
    spec = json.dumps({"alphabet": [0, 1, 2], "family": "equal_mass", "atoms": [0, 2]})
    _, out, _ = run(capsys, "check-null", "--spec", spec, "--n", "1")
    f = tmp_path / "v.json"
    f.write_text(out)
    code, out2, _ = run(capsys, "check-null", "--spec", str(f), "--n", "1")
    assert code == 0 and json.loads(out2)["status"] == json.loads(out)["status"]


def test_classify(capsys):
    code, out, _ = run(capsys, "classify", "--matrices", "[[[-1,0],[0,-1]], [[1,0],[0,1]]]")
    assert code == 0
    obj = json.loads(out)
    assert obj["meet"] == "SymmetricAboutZero"


def test_classify_csv_matrix(tmp_path, capsys):
    f = tmp_path / "m.csv"
    f.write_text("2,0\n0,0.5\n")
    code, out, _ = run(capsys, "classify", "--matrices", str(f), "--output", "csv")
    assert code == 0
    assert "meet,Empty" in out


def test_construct_density(tmp_path, capsys):
    spec = {"base": {"intervals": [[0, 1]], "heights": [1]}, "target": {"kind": "moment", "t": 1, "beta": 3}}
    code, out, _ = run(capsys, "construct-density", "--spec", json.dumps(spec))
    assert code == 0
    obj = json.loads(out)
    assert obj["check"]["passed"]
    f = tmp_path / "c.json"
    f.write_text(out)
    code, out2, _ = run(capsys, "construct-density", "--spec", str(f))
    assert code == 0 and json.loads(out2)["construction"] == obj["construction"]


def test_construct_width_violation_exit_two(capsys):
    spec = {"base": {"intervals": [[3, 4]], "heights": [1]}, "target": {"kind": "moment", "t": 2, "beta": 1}}
    code, _, err = run(capsys, "construct-density", "--spec", json.dumps(spec))
    assert code == 2


def test_simulate_csv(capsys):
    code, out, _ = run(capsys, "simulate", "--dgp", "normal", "--n", "4", "--level", "0.125", "--reps", "1000",
                       "--seed", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 2 and lines[1].startswith("normal,4,0.125,1000,")


def test_simulate_is_seed_deterministic(capsys):
    args = ("simulate", "--n", "5", "--reps", "2000", "--seed", "11")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args, "--workers", "3")
    assert a == b


def test_unknown_dgp_exit_two(capsys):
    code, _, _ = run(capsys, "simulate", "--dgp", "cauchy-ish", "--reps", "1000")
    assert code == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "randhyp", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "check-null" in r.stdout


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_rotation_demo_csv_and_json(capsys):
    code, out, _ = run(capsys, "simulate", "--demo", "gaussian-rotation", "--reps", "2000")
    assert code == 0
    lines = out.strip().splitlines()
    assert [ln.split(",")[0] for ln in lines[1:]] == ["normal_3_4", "uniform"]
    code, out, _ = run(capsys, "simulate", "--demo", "gaussian-rotation", "--reps", "2000", "--output", "json")
    obj = json.loads(out)
    assert obj["group_order"] == 216 and obj["invariance_gaussian"]["passed"]
