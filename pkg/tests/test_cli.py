import os
import subprocess
import sys
from pathlib import Path

import pytest

from intcens import cli

GOLDEN = Path(__file__).parent / "golden"
COMMANDS = ["estimate", "study", "asymptotics", "chernoff", "functional", "verify", "plot-data"]


def run(args, capsys):
    code = cli.main(args)
    out, err = capsys.readouterr()
    return code, out, err


def help_text(cmd, capsys, monkeypatch):
    monkeypatch.setenv("COLUMNS", "80")
    with pytest.raises(SystemExit) as exc:
        cli.main(([cmd] if cmd else []) + ["--help"])
    assert exc.value.code == 0
    return capsys.readouterr().out


@pytest.mark.parametrize("cmd", [None] + COMMANDS)
def test_help_golden(cmd, capsys, monkeypatch):
    name = f"help_{cmd or 'main'}.txt"
    assert help_text(cmd, capsys, monkeypatch) == (GOLDEN / name).read_text()


@pytest.mark.parametrize("cmd", COMMANDS)
def test_help_lists_every_flag(cmd, capsys, monkeypatch):
    text = help_text(cmd, capsys, monkeypatch)
    sub = cli.build_parser()._subparsers._group_actions[0].choices[cmd]
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in text
        if action.help and action.help is not cli.argparse.SUPPRESS:
            assert action.help.split("(")[0].strip()[:20] in " ".join(text.split())


@pytest.fixture
def one_row(tmp_path):
    p = tmp_path / "one.csv"
    p.write_text("1,2,0,1\n")
    return p


@pytest.mark.parametrize("est", ["ls-full", "ls-simple", "mle"])
def test_estimate_one_row(est, one_row, capsys):
    code, out, err = run(["estimate", str(one_row), "--estimator", est], capsys)
    assert code == 0
    assert out == "t,F\n1.0,0.0\n2.0,1.0\n"
    assert "config estimate" in err


def test_estimate_current_status(tmp_path, capsys):
    p = tmp_path / "cs.csv"
    p.write_text("1,1\n2,0\n")
    code, out, _ = run(["estimate", str(p), "--estimator", "current-status"], capsys)
    assert code == 0 and out == "t,F\n1.0,0.5\n2.0,0.5\n"


def test_estimate_empty_file(tmp_path, capsys):
    p = tmp_path / "empty.csv"
    p.write_text("")
    code, out, err = run(["estimate", str(p)], capsys)
    assert code == 1 and out == "" and "empty sample" in err


def test_estimate_missing_file(tmp_path, capsys):
    code, _, err = run(["estimate", str(tmp_path / "nope.csv")], capsys)
    assert code == 1 and "error" in err


def test_estimate_non_convergence(tmp_path, capsys):
    p = tmp_path / "s.csv"
    p.write_text("".join(f"{0.01 * i},{0.01 * i + 0.5},{i % 2},{(i // 2) % 2 * (1 - i % 2)}\n"
                         for i in range(1, 80)))
    code, out, err = run(["estimate", str(p), "--max-iter", "1", "--tol", "1e-15"], capsys)
    assert code == 2 and out.startswith("t,F")


def test_verify_own_output(one_row, tmp_path, capsys):
    fit = tmp_path / "fit.csv"
    assert run(["estimate", str(one_row), "--out", str(fit)], capsys)[0] == 0
    code, out, _ = run(["verify", str(one_row), str(fit)], capsys)
    assert code == 0 and '"pass": true' in out


def test_verify_rejects_wrong_fit(one_row, tmp_path, capsys):
    fit = tmp_path / "fit.csv"
    fit.write_text("t,F\n1,0.5\n2,0.5\n")
    code, out, _ = run(["verify", str(one_row), str(fit), "--which", "simple"], capsys)
    assert code == 2 and '"pass": false' in out


def test_asymptotics_row(capsys):
    code, out, _ = run(["asymptotics", "--model", "uniform", "--grid", "1.0", "--var-z", "0.26"], capsys)
    assert code == 0
    head, row = out.splitlines()
    assert head == "t,sigma,var_limit"
    assert abs(float(row.split(",")[1]) - 0.7418) < 1e-4


def test_asymptotics_bad_grid(capsys):
    code, _, err = run(["asymptotics", "--grid", "3.0", "--var-z", "0.26"], capsys)
    assert code == 1 and "grid" in err


def test_chernoff_deterministic(capsys):
    args = ["chernoff", "--paths", "500", "--seed", "7", "--no-cache", "true"]
    a = run(args, capsys)[1]
    b = run(args, capsys)[1]
    assert a == b and a.startswith("var,var_stderr,mean")


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# Var(Z) run\npaths = 400\nseed=2\nno-cache = true\n")
    a = run(["chernoff", "--config", str(cfg)], capsys)
    b = run(["chernoff", "--paths", "400", "--seed", "2", "--no-cache", "true"], capsys)
    assert a[1] == b[1]
    assert "'paths': 400" in a[2]
    c = run(["chernoff", "--config", str(cfg), "--seed", "3"], capsys)
    assert c[1] != a[1] and "'seed': 3" in c[2]


@pytest.mark.parametrize("text, msg", [
    ("bogus = 1\n", "unknown config key"),
    ("paths 3\n", "expected key = value"),
    ("paths = many\n", "config key paths"),
])
def test_config_errors(tmp_path, capsys, text, msg):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(text)
    code, _, err = run(["chernoff", "--config", str(cfg)], capsys)
    assert code == 1 and msg in err


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["study", "--bogus"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 1


def test_study_and_plot_data(tmp_path, capsys):
    cfg = tmp_path / "study.cfg"
    cfg.write_text("model = trunc-exp\nn = 80\nreps = 6\ngrid = 0.5,1.0\nestimators = ls_full,mle\n"
                   "theory = true\nvar_z = 0.26\nthreads = 1\n")
    out = tmp_path / "study.csv"
    assert run(["study", "--config", str(cfg), "--out", str(out)], capsys)[0] == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,estimator,n,reps,scaled_var,mc_stderr,theory" and len(lines) == 5
    code, long, _ = run(["plot-data", str(out), "--points", "2"], capsys)
    assert code == 0 and long.splitlines()[0] == "t,series,value"
    assert "ls_full:theory" in long


def test_functional_command(tmp_path, capsys):
    raw = tmp_path / "raw"
    code, out, _ = run(["functional", "--n", "100", "--reps", "5", "--threads", "1",
                        "--estimators", "ls-simple", "--raw-dir", str(raw)], capsys)
    assert code == 0 and out.splitlines()[0] == "estimator,n,reps,n_var,mc_stderr"
    assert len((raw / "ls_simple.txt").read_text().splitlines()) == 5


def test_console_script_entry_point(one_row):
    env = dict(os.environ, COLUMNS="80")
    res = subprocess.run([sys.executable, "-m", "intcens.cli", "-q", "estimate", str(one_row)],
                         capture_output=True, text=True, env=env)
    assert res.returncode == 0 and res.stdout == "t,F\n1.0,0.0\n2.0,1.0\n" and res.stderr == ""
