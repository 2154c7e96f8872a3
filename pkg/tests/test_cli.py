import csv
import json
import subprocess
import sys

import pytest

from geoclose.cli import main, run

AX = ["--axes", "3,2,1"]
LINE = ["--point", "1,1,sqrt(1/6)", "--direction", "0.8320502943378437,-0.5547001962252291,0"]


def out_of(capsys, argv):
    code = main(argv)
    cap = capsys.readouterr()
    return code, json.loads(cap.out if code == 0 else cap.err)


def test_caustics(capsys):
    code, out = out_of(capsys, ["caustics", *AX, *LINE])
    assert code == 0
    assert out["alpha"] == pytest.approx([95 / 78], abs=1e-13)
    assert out["degenerate"] == []


def test_caustics_degenerate_flag(capsys):
    # planar section x3 = 0
    x = "sqrt(1.5),1,0"
    y = "-0.7745966692414834,0.6324555320336759,0"
    # values starting with '-' need the --flag=value form
    code, out = out_of(capsys, ["caustics", *AX, "--point", x, f"--direction={y}"])
    assert code == 0
    assert out["degenerate"] == [{"caustic": 1, "semi_axis": 3}]


def test_bands(capsys):
    code, out = out_of(capsys, ["bands", *AX, "--caustics", "1.5"])
    assert code == 0
    assert out["bands"] == [
        {"s": 1, "band": [2.0, 3.0], "case": "no-caustic"},
        {"s": 2, "band": [1.0, 1.5], "case": "one-caustic"},
    ]
    code, out = out_of(capsys, ["bands", "--axes", "4,3,2,1", "--caustics", "2.2,2.8"])
    assert [b["case"] for b in out["bands"]] == ["no-caustic", "two-caustics", "no-caustic"]


def test_residual_and_tolerance_flag(capsys):
    argv = ["residual", *AX, "--caustics", "1.1288700296005378", "--winding", "2,3"]
    code, out = out_of(capsys, argv)
    assert code == 0 and out["thm1"]["closed"] and out["thm2"]["closed"]
    assert out["tolerances"]["close"] == 1e-9
    code, out = out_of(capsys, argv + ["--tol-close=1e-20"])
    assert out["tolerances"]["close"] == 1e-20


def test_power_range_flag(capsys):
    argv = ["residual", "--axes", "4,3,2,1", "--caustics", "2.1025206743995644,3.7489703067079896",
            "--winding", "4,5,6", "--power-range", "full"]
    code, out = out_of(capsys, argv)
    assert out["thm1"]["powers"] == [1, 2, 3]
    assert not out["thm1"]["closed"]


def test_scan_csv(capsys, tmp_path):
    path = tmp_path / "scan.csv"
    code, out = out_of(capsys, ["residual", *AX, "--winding", "2,3", "--bracket", "1.001,1.999",
                                "--csv", str(path)])
    assert code == 0 and len(out["scan"]["sign_changes_near"]) == 1
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["alpha", "relative_residual"] and len(rows) == 257


def test_solve(capsys):
    code, out = out_of(capsys, ["solve", *AX, "--winding", "2,3", "--bracket", "1.0001,1.9999"])
    assert code == 0
    assert out["alpha"][0] == pytest.approx(1.1288700296005378, abs=1e-12)
    assert out["oracle"]["closed"] and out["oracle"]["winding_cartesian"] == [4, 6]


def test_problem_file_and_determinism(capsys, tmp_path):
    prob = tmp_path / "p.json"
    prob.write_text(json.dumps({"semi_axes": [3, 2, 1], "caustics": [1.5], "winding": [2, 3],
                                "tolerances": {"close": 1e-8}}))
    _, a = run(["residual", "--problem", str(prob)])
    _, b = run(["residual", "--problem", str(prob)])
    assert json.dumps(a) == json.dumps(b)
    assert a["tolerances"]["close"] == 1e-8


def test_trace_files(capsys, tmp_path):
    path = tmp_path / "t.csv"
    code, out = out_of(capsys, ["trace", *AX, "--caustics", "1.5", "--t-max", "5", "--samples", "11",
                                "--csv", str(path)])
    assert code == 0
    assert len(list(csv.reader(open(path)))) == 12
    events = json.loads(open(out["events_json"]).read())
    assert len(events) == out["events"]


def test_verify_d3(capsys):
    code, out = out_of(capsys, ["verify", *AX, "--caustics", "1.5914233073015531", "--winding", "3,4"])
    assert code == 0
    assert out["thm1"]["closed"] and out["oracle"]["closed"]
    assert out["oracle"]["crossings"] == {"1": [6, 6], "2": [8, 8]}


@pytest.mark.parametrize("argv,code", [
    (["bands", "--axes", "1,2,3", "--caustics", "1.5"], 2),
    (["bands", *AX], 2),
    (["bands", *AX, "--caustics", "1.5", *LINE], 2),
    (["residual", *AX, "--caustics", "1.5"], 2),
    (["caustics", *AX, "--point", "1,1,1", "--direction", "0,0,1"], 2),
    (["bands", *AX, "--caustics", "1.5", "--tol-nope=1"], 2),
    (["bands", "--d", "4", *AX, "--caustics", "1.5"], 2),
    (["solve", *AX, "--winding", "1,2"], 4),
    (["bands", *AX, "--caustics", "1.99999999999"], 2),
    (["residual", *AX, "--caustics", "1.99999999", "--winding", "1,1"], 3),
])
def test_exit_codes(argv, code):
    assert run(argv)[0] == code


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "geoclose.cli", "bands", *AX, "--caustics", "2.5"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["bands"][0]["case"] == "one-caustic"
