import io
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from asyncdyn.cli import main
from asyncdyn.formats import format_spec
from asyncdyn.generators import make_example

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


def run(argv, capsys, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr(sys, "stdin", io.StringIO(stdin))
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def ex3_file(tmp_path):
    path = tmp_path / "ex3.spec"
    path.write_text(format_spec(make_example("ex3", 4)))
    return path


def test_check_pair_flip(capsys):
    code, out, _ = run(["check", "--spec", str(SAMPLES / "ex2.spec")], capsys)
    assert code == 0 and out.startswith("result: Convergent")


def test_check_r_unanimity(capsys, ex3_file, tmp_path):
    wfile = tmp_path / "w.txt"
    code, out, _ = run(["check-r", "--r", "3", "--spec", str(ex3_file),
                        "--witness-out", str(wfile)], capsys)
    assert code == 10 and "witness:" in out
    code, out, _ = run(["simulate", "--spec", str(ex3_file), "--verify-witness", str(wfile)],
                       capsys)
    assert code == 0 and out.strip() == "witness verified"


def test_report_itself_is_a_witness_file(capsys, ex3_file, tmp_path):
    code, out, _ = run(["check", "--spec", str(ex3_file)], capsys)
    report = tmp_path / "report.txt"
    report.write_text(out)
    code, out, _ = run(["simulate", "--spec", str(ex3_file), "--verify-witness", str(report)],
                       capsys)
    assert code == 0


def test_check_r_convergent_exit_zero(capsys, ex3_file):
    code, _, _ = run(["check-r", "--r", "2", "--spec", str(ex3_file)], capsys)
    assert code == 0


def test_synthesize_then_verify(capsys, ex3_file, tmp_path):
    out_file = tmp_path / "s.txt"
    assert run(["synthesize", "--spec", str(ex3_file), "--out", str(out_file)], capsys)[0] == 0
    code, out, _ = run(["simulate", "--spec", str(ex3_file), "--verify-witness", str(out_file)],
                       capsys)
    assert code == 0


def test_rejected_witness_exit_one(capsys, ex3_file, tmp_path):
    w = tmp_path / "w.txt"
    w.write_text("initial: x,x,x,x\n---\n1,2,3,4\n")
    code, out, _ = run(["simulate", "--spec", str(ex3_file), "--verify-witness", str(w)], capsys)
    assert code == 1 and "rejected" in out


def test_generate_snake_from_stdin(capsys, monkeypatch):
    _, text, _ = run(["generate", "snake", "--dim", "3"], capsys)
    code, out, _ = run(["check-r", "--r", "6"], capsys, stdin=text, monkeypatch=monkeypatch)
    assert code == 10


def test_stable_states_json(capsys):
    code, out, _ = run(["stable-states", "--spec", str(SAMPLES / "ex2.spec"), "--format", "json"],
                       capsys)
    assert code == 0 and sorted(map(tuple, json.loads(out))) == [("x", "y"), ("y", "x"), ("y", "y")]


def test_simulate_is_seed_deterministic(capsys, ex3_file):
    argv = ["simulate", "--spec", str(ex3_file), "--initial", "y,x,x,x", "--schedule",
            "randomfair", "--r", "3", "--horizon", "15", "--seed", "4"]
    first = run(argv, capsys)[1]
    assert run(argv, capsys)[1] == first
    assert "stabilized:" in first


def test_color_single_configuration(capsys):
    code, out, _ = run(["color", "--spec", str(SAMPLES / "ex1.spec"), "--initial", "y,x"], capsys)
    assert code == 0 and out.strip() == "y,x -> x,x ; y,y*"


def test_adapt_and_check(capsys, monkeypatch):
    _, text, _ = run(["adapt", str(SAMPLES / "disagree.spp")], capsys)
    code, _, _ = run(["check"], capsys, stdin=text, monkeypatch=monkeypatch)
    assert code == 10


def test_regret_table(capsys, tmp_path):
    cfg = tmp_path / "e.experiment"
    cfg.write_text("game matching_pennies\nalgorithms mw swap\nT 200\nseeds 1,2\n")
    code, out, _ = run(["regret", str(cfg)], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0].split("\t")[0] == "seed" and len(lines) == 5


def test_malformed_input_exit_two(capsys, tmp_path):
    bad = tmp_path / "bad.spec"
    bad.write_text("nodes 2\nalphabet 1: x y\nwhat\n")
    code, _, err = run(["check", "--spec", str(bad)], capsys)
    assert code == 2 and f"{bad}:3" in err


def test_hypotheses_not_met_exit_two(capsys):
    code, _, err = run(["synthesize", "--spec", str(SAMPLES / "snake_q3.spec")], capsys)
    assert code == 2 and "hypothesis" in err


def test_missing_file_exit_two(capsys):
    assert run(["check", "--spec", "/no/such/file"], capsys)[0] == 2


@pytest.mark.skipif(shutil.which("asyncdyn") is None, reason="console script not installed")
def test_shell_pipeline():
    proc = subprocess.run("asyncdyn generate snake --dim 3 | asyncdyn check-r --r 6",
                          shell=True, capture_output=True, text=True)
    assert proc.returncode == 10
