import json
import subprocess
import sys

import pytest

from ttsalab.cli import main

GTD = {"application": "gtd2", "schedule": {"a": 0.501, "b": 0.6}, "n_steps": 5000, "n_trials": 4, "master_seed": 1}


def _write(tmp_path, cfg, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_run_and_check(tmp_path, capsys):
    out = tmp_path / "rep"
    assert main(["run", _write(tmp_path, GTD), "-o", str(out)]) == 0
    assert main(["check", str(out)]) == 0
    assert capsys.readouterr().out.strip().endswith("ok")


def test_run_uses_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("TTSALAB_OUTPUT_ROOT", str(tmp_path / "root"))
    assert main(["run", _write(tmp_path, dict(GTD, output_dir="exp1"))]) == 0
    assert (tmp_path / "root" / "exp1" / "mse.csv").is_file()


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["run", _write(tmp_path, dict(GTD, schedule={"a": 0.8, "b": 0.6}))]) == 2
    assert "config error" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    assert main(["check", str(tmp_path)]) == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = dict(GTD, schedule={"a": 0.6, "b": 1.0}, output_dir=str(tmp_path / "x"))
    assert main(["run", _write(tmp_path, cfg)]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_divergence_exit_code(tmp_path):
    cfg = {"application": "custom-linear", "schedule": {"a": 0.6, "b": 0.7}, "n_steps": 5000, "n_trials": 2,
           "output_dir": str(tmp_path / "d"),
           "application_params": {"P": [[0.5, 0.5], [0.5, 0.5]], "A11": [[-300.0]], "A12": [[0.0]], "A21": [[0.0]],
                                  "A22": [[-1.0]], "c1": [[1.0], [-1.0]], "c2": [[0.0], [0.0]]}}
    assert main(["run", _write(tmp_path, cfg)]) == 3


@pytest.mark.parametrize("family, vx", [("exp", 0.125), ("sin", 0.125)])
def test_theory(capsys, family, vx):
    assert main(["theory", "gtd2", "--param", f"family={family}"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["V_x"][0][0] == pytest.approx(vx, rel=1e-9)


def test_theory_needs_target(capsys):
    assert main(["theory"]) == 2


def test_order(tmp_path, capsys):
    cfg = {"application": "sgda", "application_params": {"n": 20, "dim": 2},
           "sampler": {"kind": "nbrw", "graph": {"random": {"avg_degree": 3, "seed": 0}}},
           "compare_sampler": {"kind": "srw", "graph": {"random": {"avg_degree": 3, "seed": 0}}},
           "schedule": {"a": 0.6, "b": 0.9}, "n_steps": 10, "n_trials": 1}
    dest = tmp_path / "o.json"
    assert main(["order", _write(tmp_path, cfg), "-o", str(dest)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["samplers"] == ["nbrw", "srw"] and len(summary["trace_U"]) == 2
    assert "U" in json.loads(dest.read_text())["a"]
    assert main(["order", _write(tmp_path, GTD)]) == 2


def test_console_script_module():
    out = subprocess.run([sys.executable, "-m", "ttsalab.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "theory" in out.stdout
