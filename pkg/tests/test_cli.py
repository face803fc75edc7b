import json
import subprocess
import sys

import yaml

from conftest import PAPER_MEANS
from smile_spectrum.cli import EXIT_CONFIG, EXIT_INSTANCE, EXIT_OK, EXIT_RUNTIME, main


def config(tmp_path, **kw):
    raw = {
        "schema": 1,
        "name": "cli",
        "instance": {"kind": "paper_rayleigh6_scaled", "edges": [[1, 2]], "means": PAPER_MEANS.tolist()},
        "horizon": 500,
        "replications": 2,
        "policies": ["smile", "random"],
        "agent": {"kappa": 800, "sampling_constant": 1.0, "delta_sq": 50},
        "output": {"dir": str(tmp_path / "out"), "stride": 50},
    }
    raw.update(kw)
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(raw))
    return str(path)


def test_alloc_dry_run(capsys):
    assert main(["alloc", "fig2_alloc"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "iterations: 7  slots: 9" in out
    assert "iteration 2: cell 3 -> channel 3 (80): collision with 4" in out
    assert "iteration 6: cell 3 -> channel 1 (58): collision with 1" in out
    assert "allocation: 1->1, 2->3, 3->2, 4->3, 5->2" in out


def test_enumerate(capsys):
    assert main(["enumerate", "paper_3x5"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "{1: 1, 2: 5, 3: 3} value 205 (greedy)" in out
    assert "1 stable allocation(s)" in out


def test_constants(capsys):
    assert main(["constants", "paper_3x5"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["kappa"] == 800 and data["c_max"] == 6


def test_run_writes_files(tmp_path, capsys):
    assert main(["run", config(tmp_path), "--jobs", "1"]) == EXIT_OK
    assert (tmp_path / "out" / "smile.csv").exists()
    assert "artifacts in" in capsys.readouterr().out


def test_run_out_flag(tmp_path):
    assert main(["run", config(tmp_path), "--jobs", "1", "--out", str(tmp_path / "flag")]) == EXIT_OK
    assert (tmp_path / "flag" / "manifest.json").exists()


def test_exit_code_config_error(tmp_path, capsys):
    assert main(["run", config(tmp_path, schema=9)]) == EXIT_CONFIG
    assert main(["run", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text("schema: [1\n")
    assert main(["run", str(bad)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_exit_code_instance_error(tmp_path):
    reducible = {"kind": "explicit", "edges": [],
                 "models": [[{"states": [1, 2], "transition": [[1, 0], [0, 1]]}]]}
    assert main(["constants", config(tmp_path, instance=reducible, horizon=10)]) == EXIT_INSTANCE
    deadlock = {"kind": "paper_rayleigh6_scaled", "edges": [[1, 2]], "means": [[5.0], [6.0]]}
    assert main(["alloc", config(tmp_path, instance=deadlock, horizon=10)]) == EXIT_INSTANCE


def test_exit_code_runtime_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    assert main(["run", config(tmp_path), "--jobs", "1", "--out", str(blocker)]) == EXIT_RUNTIME


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "smile_spectrum", "fixtures"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "paper_3x5" in proc.stdout.split()
