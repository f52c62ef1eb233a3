import json
import os
import pathlib

import pytest

import mchr

DEMO = pathlib.Path(os.environ.get("MCHR_DEMO_DIR", pathlib.Path(__file__).resolve().parents[2] / "data" / "demo"))

PROFILES = [
    {"id": "a", "role": "primary-1", "accuracy": 0.5},
    {"id": "b", "role": "primary-2", "accuracy": 0.5},
    {"id": "c", "role": "tiebreaker", "accuracy": 0.5},
]

TASK = {"id": "t", "level": 3, "labels": ["x", "y", "z"], "threshold": 0.8, "qc_rate": 0.0}


def test_normalize():
    assert mchr.normalize_label("  Front-End ") == mchr.normalize_label("front-end")
    assert mchr.normalize_label(mchr.normalize_label("React.JS")) == mchr.normalize_label("React.JS")


def test_wilson():
    lo, hi = mchr.wilson_ci(90, 100)
    assert lo == pytest.approx(0.825633, abs=1e-6)
    assert hi == pytest.approx(0.944771, abs=1e-6)
    assert mchr.wilson_ci(0, 0) is None
    assert mchr.wilson_ci(0, 5)[0] == 0.0


def test_oracle_and_simulation():
    sharp = [dict(p, conf_correct_lo=0.85, conf_wrong_lo=0.4, conf_wrong_hi=0.79) for p in PROFILES]
    e = mchr.expected_outcome(sharp, 2, 0.8)
    assert e["hrr"] == pytest.approx(0.25)
    assert e["auto_accuracy"] == pytest.approx(2 / 3)

    r = mchr.simulate(PROFILES, TASK, n=500, seed=3)
    level = r["levels"][0]
    assert level["n"] == 500
    assert level["hrr"] + level["reduction"] == pytest.approx(100.0)
    assert r == mchr.simulate(PROFILES, TASK, n=500, seed=3)


def test_errors():
    with pytest.raises(mchr.Error, match="config"):
        mchr.simulate(PROFILES[:2], TASK)


def test_demo_run(tmp_path):
    out = tmp_path / "run"
    code, stdout, _ = mchr.cli("run", "--task", DEMO / "task.json", "--input", DEMO / "dataset.jsonl",
                               "--models", DEMO / "models.json", "--out", out, "--seed", 7, "--no-fsync")
    assert code == 0
    assert "HRR: 33.33" in stdout
    with pytest.raises(mchr.Error, match="incomplete"):
        mchr.report(out)
    r = mchr.report(out, allow_incomplete=True)
    assert r["incomplete"] is True
    code, stdout, _ = mchr.cli("report", "--run", out, "--format", "json")
    assert code == 1
    assert json.loads(stdout)["levels"][0]["n"] == 6
