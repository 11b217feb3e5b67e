"""End-to-end smoke test: run the CLI as a subprocess, the way a user would."""
import json
import subprocess
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]

pytestmark = pytest.mark.integration


def _run(*args, cwd=REPO_ROOT):
    return subprocess.run(
        [sys.executable, "-m", "app.cli", *args],
        cwd=str(cwd),
        capture_output=True,
        text=True,
        timeout=300,
    )


def test_stability_example():
    result = _run("stability", "--model", "pfc", "--alpha", "1", "--m", "0", "--a", "1", "--dim", "2")
    assert result.returncode == 0, result.stderr
    assert result.stdout.startswith("stable")
    assert "1479.59" in result.stdout


def test_decide_example():
    result = _run("decide", "--model", "pfc", "--alpha", "1", "--m", "1", "--a", "0.5", "--dim", "2")
    assert result.returncode == 0, result.stderr
    assert result.stdout.splitlines()[0].startswith("CertifiedGlobal")


def test_selftest_passes():
    result = _run("selftest")
    assert result.returncode == 0, result.stderr
    assert "all identity checks pass" in result.stdout


def test_usage_errors_exit_2():
    assert _run("frobnicate").returncode == 2
    assert _run("stability", "--no-such-flag").returncode == 2
    missing = _run("stability")
    assert missing.returncode == 2
    assert "a potential is needed" in missing.stderr


def test_logging_stays_off_stdout():
    result = _run("stability", "--a", "1", "--json", "--log-level", "DEBUG")
    assert result.returncode == 0, result.stderr
    assert json.loads(result.stdout)["stable"] is True


def test_repeated_runs_write_identical_records(tmp_path):
    outputs = []
    for name, threads in (("one.ndjson", "1"), ("two.ndjson", "2")):
        out = tmp_path / name
        result = _run(
            "phase-diagram", "--dim", "1", "--m-range", "0,1,0.5", "--a-range", "0,1600",
            "--resolution", "4", "--bisect-tol", "50", "--threads", threads, "--out", str(out),
        )
        assert result.returncode == 0, result.stderr
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        for row in rows:
            row.pop("wallclock")
        outputs.append((rows, out.with_name(out.stem + ".curve.csv").read_text()))
    assert outputs[0] == outputs[1]
