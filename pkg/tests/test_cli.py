import json

import pytest

from textnet import cli
from textnet.lsa import ConvergenceError

PLANTED = {"blocks": [[20, 0.5], [20, 0.5]], "cross_mean": 0.05, "noise_sd": 0.02, "seed": 0}


@pytest.fixture
def cfg(tmp_path):
    (tmp_path / "p.json").write_text(json.dumps(PLANTED))
    (tmp_path / "c.toml").write_text('planted = "p.json"\nthreshold = 0.15\nmin_residual = 5\nrestarts = 3\noutput_dir = "o"\n')
    return str(tmp_path / "c.toml")


def test_run_ok(cfg, capsys):
    assert cli.main(["run", "--config", cfg, "--seed", "3", "--threads", "2"]) == 0
    out = capsys.readouterr().out
    assert "communities    2" in out


def test_stage_ok_then_up_to_date(cfg, capsys):
    assert cli.main(["graph", "--config", cfg]) == 0
    assert cli.main(["graph", "--config", cfg]) == 0
    assert "up to date" in capsys.readouterr().out


def test_config_error_exit(cfg, capsys):
    assert cli.main(["run", "--config", cfg, "--set", "threshold=2"]) == 2
    assert "threshold" in capsys.readouterr().err
    assert cli.main(["run", "--config", cfg + ".missing"]) == 2


def test_missing_artifact_exit(cfg, capsys):
    assert cli.main(["merge", "--config", cfg]) == 3
    assert "run stage graph first" in capsys.readouterr().err
    assert cli.main(["graph", "--config", cfg]) == 0
    assert cli.main(["merge", "--config", cfg]) == 3
    assert "run stage extract first" in capsys.readouterr().err


def test_numerical_failure_exit(tmp_path, monkeypatch, capsys):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text('{"id": "a", "text": "alpha beta"}\n{"id": "b", "text": "gamma delta"}\n{"id": "c", "text": "alpha gamma"}\n')
    (tmp_path / "t.toml").write_text('corpus = "c.jsonl"\noutput_dir = "o"\n')

    def boom(*a, **k):
        raise ConvergenceError(300, 1e-3)

    monkeypatch.setattr("textnet.lsa.fit", boom)
    assert cli.main(["run", "--config", str(tmp_path / "t.toml")]) == 4
    assert "did not converge" in capsys.readouterr().err


def test_synth(tmp_path):
    out = tmp_path / "s.jsonl"
    assert cli.main(["synth", "--out", str(out), "--docs", "20", "--topics", "2"]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 20 and {json.loads(l)["tags"][0] for l in lines} == {"t0", "t1"}


def test_sweep(cfg, tmp_path):
    assert cli.main(["sweep", "--config", cfg, "--grid", "threshold=0.15,0.3"]) == 0
    assert (tmp_path / "o" / "sweep_nmi.csv").exists()
    assert (tmp_path / "o" / "threshold=0.3" / "manifest.json").exists()


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "textnet", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "textnet" in r.stdout
