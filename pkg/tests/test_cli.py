import json
import shutil
import subprocess
import sys

import pytest

from mfpso.cli import build_parser, main


def run(*argv):
    return main([str(a) for a in argv])


def test_optimize_small_run(tmp_path, capsys):
    code = run("optimize", "--function", "ackley", "--dim", 2, "--mode", "cbo_mem",
               "--particles", 50, "--seed", 1, "--out", tmp_path)
    assert code == 0
    out = capsys.readouterr().out
    value = float(out.split("value = ")[1].split()[0])
    assert value < 0.1
    assert (tmp_path / "result.csv").exists()


def test_optimize_reproducible(tmp_path):
    for name in ("a", "b"):
        assert run("optimize", "--function", "rastrigin", "--dim", 3, "--particles", 20,
                   "--seed", 4, "--n-max", 200, "--trace", "--out", tmp_path / name) == 0
    for f in ("result.csv", "trajectory.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_missing_function_is_config_error(tmp_path, capsys):
    assert run("optimize", "--out", tmp_path) == 2
    assert "function is required" in capsys.readouterr().err


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"solver": {"sigmaa": 1}}))
    assert run("optimize", "--config", cfg, "--function", "ackley", "--out", tmp_path) == 2


def test_unknown_flag_and_no_command():
    assert run("optimize", "--bogus") == 2
    assert run() == 2


def test_divergence_exit_code(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"objective": {"function": "ackley", "dim": 2},
                               "solver": {"sigma": 1e300, "alpha": 0.0},
                               "experiment": {"n_max": 50}}))
    with pytest.warns(RuntimeWarning):
        assert run("optimize", "--config", cfg, "--out", tmp_path) == 3


def test_benchmark_table_filter(tmp_path):
    assert run("benchmark", "--table", "table1A", "--filter", "m=0.0 nomem N=50", "--runs", 2,
               "--out", tmp_path) == 0
    lines = (tmp_path / "aggregate.csv").read_text().splitlines()
    assert len(lines) == 2
    assert len(list(tmp_path.glob("runs_*.csv"))) == 1
    assert run("benchmark", "--table", "table1A", "--filter", "nothing", "--out", tmp_path) == 2
    assert run("benchmark", "--out", tmp_path) == 2


def test_benchmark_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"objective": {"function": "ackley", "dim": 2, "domain": [-3, 3]},
                               "experiment": {"n_max": 100, "n_particles": 10}}))
    assert run("benchmark", "--config", cfg, "--runs", 2, "--out", tmp_path) == 0
    assert (tmp_path / "aggregate.csv").exists()


def test_meanfield_snapshots(tmp_path):
    assert run("meanfield", "--pde", "pso", "--tfinal", 0.1, "--snap", "0.05,0.1",
               "--nx", 31, "--nv", 41, "--compare-particles", 2000, "--out", tmp_path) == 0
    dumps = sorted(tmp_path.glob("density_t*.txt"))
    assert len(dumps) == 2
    assert len(list(tmp_path.glob("marginal_t*.csv"))) == 2
    assert len(list(tmp_path.glob("kde_t*.csv"))) == 2
    for d in dumps:
        mass = float(d.read_text().split("\n", 1)[0].split()[-1])
        assert 0 < mass <= 1 + 1e-10
    assert (tmp_path / "distance.csv").read_text().startswith("t,")


def test_meanfield_cbo_and_memory(tmp_path):
    assert run("meanfield", "--pde", "cbo", "--tfinal", 0.1, "--out", tmp_path / "c") == 0
    assert run("meanfield", "--pde", "pso_mem", "--tfinal", 0.02, "--nx", 15, "--nv", 15,
               "--out", tmp_path / "m") == 0


def test_meanfield_cfl_violation(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"meanfield": {"nu": 500.0}}))
    code = run("meanfield", "--pde", "pso_mem", "--config", cfg, "--tfinal", 0.02,
               "--nx", 15, "--nv", 15, "--out", tmp_path)
    assert code == 2
    assert "dt" in capsys.readouterr().err


def test_limit(tmp_path, capsys):
    assert run("limit", "--m-list", "0.2,0.1", "--particles", 50, "--tfinal", 0.5,
               "--out", tmp_path) == 0
    lines = (tmp_path / "rate.csv").read_text().splitlines()
    assert lines[0].startswith("m,gap") and len(lines) >= 3
    assert "slope" in capsys.readouterr().out


def test_check_mode(capsys):
    assert run("check", "--only", "4") == 0
    assert "[PASS]  4" in capsys.readouterr().out


def test_help_lists_every_flag_with_default():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    for name, sp in sub.items():
        text = sp.format_help()
        for action in sp._actions:
            for opt in action.option_strings:
                assert opt in text
            if action.option_strings and action.help and action.default is not None \
                    and action.default is not False and action.dest != "help":
                assert "default" in text
    assert "--print-schema" in parser.format_help()


def test_print_schema(capsys):
    assert run("--print-schema") == 0
    assert "## `solver`" in capsys.readouterr().out


@pytest.mark.skipif(shutil.which("mfpso") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["mfpso", "optimize", "--function", "ackley", "--dim", "1",
                           "--particles", "10", "--n-max", "20", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def test_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mfpso.cli", "check", "--only", "99"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
