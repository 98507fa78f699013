import csv
import io
import json
import math

import pytest

from oracles import seq_out_closed_form
from qhe.cli import compare_header, fmt, main
from qhe.optimize import SWEEP_COLUMNS


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_seq_out_json(capsys):
    code, out, _ = run(capsys, "run", "--engine", "seq-out", "--A", "50", "--Th", "100", "--Tc", "5", "--lambda", "1.5707963")
    assert code == 0
    doc = json.loads(out)
    assert doc["engine"] == "seq-out"
    assert set(doc["metrics"]) == {"q_hot", "q_cold_stroke", "q_total", "w_battery", "pcg", "eta", "closure"}
    _, w = seq_out_closed_form(50.0, 100.0, 5.0, 1.5707963)
    assert doc["metrics"]["w_battery"] == pytest.approx(w, abs=1e-10)
    assert doc["params"]["A"] == 50.0 and "generated_at" in doc


def test_run_zero_angle(capsys):
    code, out, _ = run(capsys, "run", "--engine", "seq-out", "--A", "50", "--Th", "10", "--Tc", "10", "--lambda", "0")
    m = json.loads(out)["metrics"]
    assert code == 0 and abs(m["w_battery"]) <= 1e-12 and m["q_hot"] == 0.0


def test_run_deterministic_apart_from_timestamp(capsys):
    argv = ["run", "--engine", "sim-frag", "--A", "30", "--Th", "20", "--Tc", "4", "--omega-sb", "6", "--t2", "3"]
    a = json.loads(run(capsys, *argv)[1])
    b = json.loads(run(capsys, *argv)[1])
    a.pop("generated_at"), b.pop("generated_at")
    assert a == b


def test_run_seq_frag_reports_cycles(capsys):
    code, out, _ = run(capsys, "run", "--engine", "seq-frag", "--A", "30", "--Th", "20", "--Tc", "1", "--cycles", "3")
    doc = json.loads(out)
    assert code == 0 and len(doc["cycles"]) == 3 and doc["metrics"] == doc["cycles"][1]


def test_run_csv(capsys, tmp_path):
    path = tmp_path / "out.csv"
    code, out, _ = run(capsys, "run", "--engine", "seq-out", "--A", "20", "--Th", "30", "--Tc", "2", "--format", "csv", "-o", str(path))
    assert code == 0 and out == ""
    text = path.read_bytes().decode()
    assert "\r" not in text and text.endswith("\n")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 1 and float(rows[0]["A"]) == 20.0


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--engine", "seq-out", "--Th", "10", "--Tc", "10"],
        ["run", "--engine", "seq-out", "--A", "-1", "--Th", "10", "--Tc", "10"],
        ["run", "--engine", "sim-out", "--A", "10", "--Th", "10", "--Tc", "10", "--omega-sb", "8"],
        ["run", "--engine", "warp", "--A", "10", "--Th", "10", "--Tc", "10"],
        ["run", "--A", "ten"],
        ["sweep", "--engine", "sim-out", "--eta-vs-tc", "5,10"],
        ["sweep", "--engine", "seq-out", "--tu-min", "10", "--tu-max", "5"],
        ["frobnicate"],
        [],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert out == "" and len(err.strip().splitlines()) == 1


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# engine settings\nengine = seq-out\nA = 50\nTh = 100\nTc = 5\nlambda = 0.3\n")
    doc = json.loads(run(capsys, "run", "--config", str(cfg))[1])
    assert doc["params"]["lambda"] == 0.3
    doc = json.loads(run(capsys, "run", "--config", str(cfg), "--Th", "40", "--lambda", "1.0")[1])
    assert doc["params"]["T_H"] == 40.0 and doc["params"]["lambda"] == 1.0
    cfg.write_text("bogus = 1\n")
    assert run(capsys, "run", "--config", str(cfg))[0] == 2
    assert run(capsys, "run", "--config", str(tmp_path / "missing.cfg"))[0] == 2


def test_sweep_csv_round_trip(capsys):
    code, out, _ = run(
        capsys, "sweep", "--engine", "seq-out", "--tu-min", "5", "--tu-max", "50", "--tu-steps", "4",
        "--eta-vs-tc", "5,10,15,20", "--jobs", "1",
    )
    assert code == 0
    lines = out.split("\n")
    assert lines[0] == ",".join(SWEEP_COLUMNS) + ",eta_tc_5,eta_tc_10,eta_tc_15,eta_tc_20"
    rows = list(csv.reader(io.StringIO(out)))[1:]
    assert len(rows) == 4
    for row in rows:
        for cell in row:
            assert fmt(float(cell)) == cell
    w = [float(r[1]) for r in rows]
    assert w == sorted(w)
    # a colder sink lowers the efficiency of the same work optimum
    last = [float(x) for x in rows[-1][-4:]]
    assert last == sorted(last) and last[-1] == pytest.approx(1.0)


def test_sweep_json(capsys):
    code, out, _ = run(capsys, "sweep", "--engine", "seq-out", "--tu-steps", "1", "--tu-min", "20", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["columns"] == list(SWEEP_COLUMNS) and doc["rows"][0]["th_star"] == 20.0


def test_compare_tiny(capsys):
    code, out, err = run(
        capsys, "compare", "--tu-min", "20", "--tu-steps", "1", "--grid-points", "2", "--max-iter", "0", "--jobs", "1"
    )
    assert code in (0, 1)
    header = out.splitlines()[0].split(",")
    assert header == compare_header()
    for k in ("seq_out_w_m", "seq_frag_w_m", "sim_out_w_m", "sim_frag_w_m"):
        assert k in header
    assert len(out.splitlines()) == 2
    assert code == (1 if "FAIL" in err else 0)


def test_verify_listed_only(capsys):
    code, out, _ = run(capsys, "verify", "--only", "listed")
    assert code == 0 and "2/2 checks passed" in out


def test_verify_tamper_fails(capsys):
    code, out, _ = run(capsys, "verify", "--only", "gibbs", "--tamper", "kappa-sign")
    assert code == 1 and "FAIL" in out


def test_fmt():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(2.0) == "2" and fmt(math.pi * 1e-20) == "3.14159265359e-20"
