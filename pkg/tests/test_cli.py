import csv
import json
import subprocess
import sys

import pytest

from pyramid_dg import cli


def read(path):
    return list(csv.reader(open(path)))


@pytest.mark.parametrize("argv", [
    ["--cmd", "project", "--N", "-1"],
    ["--cmd", "project", "--N", "40"],
    ["--cmd", "project", "--gamma", "2.5"],
    ["--cmd", "advect", "--alpha", "1.5"],
    ["--cmd", "wave", "--K1D", "0"],
    ["--cmd", "cheb", "--tol", "0"],
    ["--N", "2"],
])
def test_config_errors_exit_2(argv, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path / "o.csv")]) == 2
    assert "config error" in capsys.readouterr().err


def test_unreadable_config_file(tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text("{not json")
    assert cli.main(["--config", str(bad), "--out", str(tmp_path / "o.csv")]) == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"cmd": "eig", "gamma": [0.5], "N": [1, 2]}))
    out = tmp_path / "e.csv"
    assert cli.main(["--config", str(cfg), "--N", "1", "--out", str(out)]) == 0
    rows = read(out)
    assert rows[0] == cli.HEADERS["eig"]
    assert [r[1] for r in rows[1:]] == ["1"]
    man = json.loads(out.with_suffix(".manifest.json").read_text())
    assert man["status"] == 0 and man["error"] is None and man["config"]["gamma"] == [0.5]


def test_parse_lists():
    assert cli.parse_int_list("1..4") == [1, 2, 3, 4]
    assert cli.parse_int_list("2,5") == [2, 5]
    assert cli.parse_float_list("0.2, 1") == [0.2, 1.0]


def test_project_gamma_mode(tmp_path):
    out = tmp_path / "p.csv"
    assert cli.main(["--cmd", "project", "--gamma", "0.2,1", "--N", "1..2", "--out", str(out)]) == 0
    rows = read(out)
    assert rows[0] == ["basis", "gamma", "N", "l2_error"]
    assert len(rows) == 1 + 2 * 2 * 2
    assert {r[0] for r in rows[1:]} == {"seminodal", "lsc"}


def test_project_h_mode(tmp_path):
    out = tmp_path / "p.csv"
    assert cli.main(["--cmd", "project", "--K1D", "1,2", "--N", "1", "--out", str(out)]) == 0
    rows = read(out)
    assert rows[0] == ["basis", "K1D", "N", "l2_error"]
    err = {(r[0], r[1]): float(r[3]) for r in rows[1:]}
    assert err[("seminodal", "2")] < err[("seminodal", "1")]


def test_cheb_rows(tmp_path):
    out = tmp_path / "c.csv"
    assert cli.main(["--cmd", "cheb", "--gamma", "0.5", "--N", "3", "--out", str(out)]) == 0
    rows = read(out)
    assert rows[0] == cli.HEADERS["cheb"]
    res = [float(r[2]) for r in rows[1:]]
    bound = [float(r[3]) for r in rows[1:]]
    assert res[-1] < 1e-10 * res[0] * 10
    assert all(r <= b * (1 + 1e-8) for r, b in zip(res, bound))


def test_cheb_nonconvergence_exit_3(tmp_path):
    out = tmp_path / "c.csv"
    assert cli.main(["--cmd", "cheb", "--gamma", "1", "--N", "3", "--max-iter", "2", "--out", str(out)]) == 3
    rows = read(out)
    assert rows[-1][0] == "ERROR"
    assert json.loads(out.with_suffix(".manifest.json").read_text())["status"] == 3


def test_advect_wave_specradius_small(tmp_path):
    out = tmp_path / "a.csv"
    assert cli.main(["--cmd", "advect", "--N", "1", "--K1D", "1,2", "--final-time", "0.05",
                     "--alpha", "0", "--out", str(out)]) == 0
    rows = read(out)
    assert rows[0] == cli.HEADERS["advect"] and len(rows) == 3
    # central flux: the only drift is the integrator's, at the study CFL
    assert all(abs(float(r[4])) < 1e-5 for r in rows[1:])

    out = tmp_path / "w.csv"
    assert cli.main(["--cmd", "wave", "--N", "1", "--K1D", "1,2", "--final-time", "0.05", "--out", str(out)]) == 0
    rows = read(out)
    assert rows[0] == cli.HEADERS["wave"] and rows[1][3] == "" and float(rows[2][3]) > 0

    out = tmp_path / "s.csv"
    assert cli.main(["--cmd", "specradius", "--N", "1", "--K1D", "1", "--out", str(out)]) == 0
    rows = read(out)
    assert rows[0] == cli.HEADERS["specradius"] and float(rows[1][2]) > 0


def test_byte_determinism(tmp_path):
    args = ["--cmd", "advect", "--N", "1", "--K1D", "2", "--final-time", "0.05"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_console_entry_point(tmp_path):
    out = tmp_path / "e.csv"
    r = subprocess.run([sys.executable, "-m", "pyramid_dg.cli", "--cmd", "eig", "--gamma", "0.3", "--N", "1",
                        "--out", str(out)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert read(out)[0] == cli.HEADERS["eig"]


def test_cheb_default_matches_study(tmp_path):
    out = tmp_path / "c.csv"
    assert cli.main(["--cmd", "cheb", "--gamma", "1", "--out", str(out)]) == 0
    assert int(read(out)[-1][1]) > 10
