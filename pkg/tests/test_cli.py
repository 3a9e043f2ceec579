from __future__ import annotations

import json

import pytest

from gwperc.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_survival_exact_rows(capsys):
    code, out, _ = run(capsys, "survival", "--dist", "det:2", "--depth", "2", "--csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("n,q_n")
    assert [float(l.split(",")[1]) for l in lines[1:]] == [1.0, 0.75, 0.609375]


def test_json_record(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, _, _ = run(capsys, "survival", "--dist", "unif:1:3", "--tree-seed", "4", "--depth", "5", "--json", str(path))
    assert code == 0
    rec = json.loads(path.read_text())
    assert {"command", "spec", "seeds", "params", "version", "backend", "wall_time", "results"} <= set(rec)
    assert rec["command"] == "survival" and len(rec["results"]["rows"]) == 6


def test_gen_tree_is_reproducible(capsys, tmp_path):
    a, b = tmp_path / "a.gw", tmp_path / "b.gw"
    for p in (a, b):
        assert run(capsys, "gen-tree", "--dist", "unif:1:3", "--seed", "42", "--depth", "6", "--out", str(p))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    code, out, _ = run(capsys, "survival", "--tree", str(a), "--depth", "6", "--csv")
    assert code == 0 and len(out.strip().splitlines()) == 8


def test_monte_carlo_survival(capsys):
    code, out, _ = run(capsys, "survival", "--dist", "det:2", "--depth", "3", "--mc", "20000", "--csv")
    assert code == 0 and len(out.strip().splitlines()) == 5


@pytest.mark.parametrize("argv", [
    ("moments", "--dist", "unif:1:3", "--depth", "6", "--k", "3"),
    ("martingale-decay", "--dist", "unif:1:3", "--nmax", "6", "--trees", "200", "--seed", "1"),
    ("yaglom", "--dist", "det:2", "--explicit-depth", "0", "--depth", "16", "--accepted", "200", "--seed", "1"),
    ("iic", "--dist", "unif:1:3", "--explicit-depth", "0", "--depth", "16", "--reps", "1000", "--seed", "1",
     "--lookahead", "5", "--sensitivity", "3,5", "--sensitivity-steps", "2"),
    ("annealed", "survival", "--dist", "det:2", "--depth", "100", "--every", "10"),
    ("annealed", "yaglom", "--dist", "det:2", "--depth", "20", "--accepted", "1000"),
    ("annealed", "iic", "--dist", "det:2", "--depth", "20", "--reps", "1000"),
    ("spread", "--dist", "unif:1:3", "--explicit-depth", "8", "--depth", "16", "--reps", "300", "--seed", "2"),
])
def test_commands_run(capsys, argv):
    code, out, _ = run(capsys, *argv, "--csv")
    assert code == 0 and out.strip()


def test_bad_spec_exit_code(capsys):
    code, _, err = run(capsys, "survival", "--dist", "det:1", "--depth", "2")
    assert code == 3 and err


def test_missing_tree_file(capsys, tmp_path):
    code, _, _ = run(capsys, "survival", "--tree", str(tmp_path / "none.gw"), "--depth", "2")
    assert code == 3


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["survival"])
    assert info.value.code == 2


def test_verify_all_subset(capsys):
    code, out, _ = run(capsys, "verify-all", "--only", "1,2,6")
    assert code == 0
    assert out.count("[PASS]") == 3
