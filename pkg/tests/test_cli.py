import csv
import json
import subprocess
import sys

import pytest

from csgcheck.casestudies import write_robot_grid
from csgcheck.cli import RESULT_FIELDS, RunConfig, main, parse_sweep, sweep_points

from conftest import MODELS

RPS = '<<p1>> Pmax=? [ !"win2" U "win1" ]'
MAC_PAIR = '<<u1:u2>> max=? ( P[ F "first1" ] + P[ F "first2" ] )'


def rows(out):
    with open(out / "results.csv", newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def test_rps_value(tmp_path):
    assert main([str(MODELS / "rps.csg"), "-p", RPS, "--out", str(tmp_path)]) == 0
    (row,) = rows(tmp_path)
    assert list(row) == RESULT_FIELDS
    assert row["state"] == "s0" and float(row["value1"]) == pytest.approx(0.5, abs=1e-6)
    assert row["converged"] == "true" and row["value2"] == ""
    log = [json.loads(line) for line in (tmp_path / "diagnostics.log").read_text().splitlines()]
    assert any(e["kind"] == "result" and e["wall_time"] >= 0 for e in log)


def test_exit_codes(tmp_path, capsys):
    model = str(MODELS / "rps.csg")
    assert main([model, "-p", '<<p1>> P>=0.6 [ !"win2" U "win1" ]', "--out", str(tmp_path)]) == 1
    assert rows(tmp_path)[0]["sat"] == "false"
    assert main([model, "-p", '<<p1>> P>=0.4 [ !"win2" U "win1" ]', "--out", str(tmp_path)]) == 0
    assert main([str(tmp_path / "missing.csg"), "-p", RPS, "--out", str(tmp_path)]) == 2
    assert "cannot read model" in capsys.readouterr().err
    assert main([model, "-p", '<<p1>> Pmax=? [ F "nope" ]', "--out", str(tmp_path)]) == 2
    assert "unknown atom" in capsys.readouterr().err
    assert main([model, "--out", str(tmp_path)]) == 2
    assert main([model, "-p", RPS, "--epsilon", "0", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.csg"
    bad.write_text("csg\nplayers 2\nbogus line\n")
    assert main([str(bad), "-p", RPS, "--out", str(tmp_path)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_assumption_needs_force(tmp_path, capsys):
    model = str(MODELS / "negative_loop.csg")
    prop = '<<p1,p2>> R{"r"}max=? [ F "a" ]'
    assert main([model, "-p", prop, "--out", str(tmp_path)]) == 2
    assert "--force" in capsys.readouterr().err
    assert main([model, "-p", prop, "--force", "--out", str(tmp_path)]) == 0
    assert rows(tmp_path)[0]["converged"] == "false"
    kinds = [json.loads(l)["kind"] for l in (tmp_path / "diagnostics.log").read_text().splitlines()]
    assert "oscillation" in kinds


def test_sweep_parsing():
    assert parse_sweep("k=1..3") == ("k", ["1", "2", "3"])
    assert parse_sweep("q=0.5,0.9") == ("q", ["0.5", "0.9"])
    with pytest.raises(ValueError):
        parse_sweep("k")
    assert list(sweep_points([("a", ["1", "2"]), ("b", ["x"])])) == [{"a": "1", "b": "x"}, {"a": "2", "b": "x"}]
    with pytest.raises(ValueError):
        RunConfig(MODELS / "rps.csg", [RPS], workers=0)


def test_robot_bounded_sweep(tmp_path):
    model = write_robot_grid(4, tmp_path / "robot4.csg")
    code = main([str(model), "-p", '<<rbt1>> Pmax=? [ !"c" U<=${k} "g1" ]', "--sweep", "q=0.25",
                 "--sweep", "k=1..10", "--out", str(tmp_path)])
    assert code == 0
    got = rows(tmp_path)
    assert len(got) == 10
    assert [r["params"] for r in got] == [f"q=0.25;k={k}" for k in range(1, 11)]
    vals = [float(r["value1"]) for r in got]
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
    assert vals[1] == 0 and vals[-1] > 0.8


def run_cli(out, *extra):
    cmd = [sys.executable, "-m", "csgcheck.cli", str(MODELS / "mac.csg"), "-p", MAC_PAIR, "-p", RPS.replace(
        "p1", "u1").replace("win2", "tr2").replace("win1", "tr1"), "--sweep", "q=0.5,0.9", "--force",
           "--synth", "--out", str(out), *extra]
    subprocess.run(cmd, check=True, capture_output=True)
    return (out / "results.csv").read_bytes()


def test_byte_identical_results(tmp_path):
    a = run_cli(tmp_path / "a", "--workers", "1")
    b = run_cli(tmp_path / "b", "--workers", "1")
    c = run_cli(tmp_path / "c", "--workers", "3")
    assert a == b == c
    for out in ("a", "c"):
        dots = sorted(p.name for p in (tmp_path / out).glob("*.dot"))
        assert dots == ["strategy_p1_q0.5.dot", "strategy_p1_q0.9.dot", "strategy_p2_q0.5.dot",
                        "strategy_p2_q0.9.dot"]
        assert (tmp_path / out / "strategy_p1_q0.5.dot").read_bytes() == (tmp_path / "b" /
                                                                          "strategy_p1_q0.5.dot").read_bytes()
    lines = a.decode().splitlines()
    assert len(lines) == 5
    pair = [l for l in lines if "first1" in l]
    assert [l.split(",")[3:5] for l in pair] == [["0.5", "0.5"], ["0.9", "0.9"]]


def test_table_export(tmp_path):
    code = main([str(MODELS / "stag_hunt.csg"), "-p",
                 '<<h1:h2,h3>> max=? ( R{"u1"}[ C<=1 ] + R{"u23"}[ C<=1 ] )', "--synth", "--export", "table",
                 "--out", str(tmp_path)])
    assert code == 0
    (row,) = rows(tmp_path)
    assert (row["value1"], row["value2"], row["epsilon"]) == ("6.0", "9.0", "0.0")
    table = (tmp_path / "strategy_p1.csv").read_text()
    assert table.startswith("state,memory,step,action,prob\n")
    assert "root,main,0,h1=c1,1.0" in table
