from __future__ import annotations

import json
import shutil
import subprocess
import sys

import pytest

from valuenav.cli import main
from valuenav.suite import fixture_path


def test_run_apartment_suite(tmp_path, capsys):
    out = tmp_path / "apt.jsonl"
    assert main(["run", str(fixture_path("apartment.suite")), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 10
    assert all(json.loads(l)["v"] == 1 for l in lines)
    assert "SPL" in capsys.readouterr().out


def test_metrics_command(tmp_path, capsys):
    out = tmp_path / "r.jsonl"
    main(["run", str(fixture_path("apartment.suite")), "--out", str(out)])
    capsys.readouterr()
    assert main(["metrics", str(out), "--json"]) == 0
    table = json.loads(capsys.readouterr().out)
    assert table["episodes"] == 10 and 0 <= table["SPL"] <= table["SR"] <= 100


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "x.suite", "--n-directions", "5"],
        ["run"],
        ["bogus"],
        ["run", "x.suite", "--backend", "magic"],
    ],
)
def test_usage_errors_exit_2(argv):
    assert main(argv) == 2


def test_record_without_transcripts_is_usage_error():
    assert main(["record", str(fixture_path("sealed.suite"))]) == 2


def test_validate_scene(tmp_path, capsys):
    assert main(["validate-scene", str(fixture_path("office.scene.json"))]) == 0
    assert "ok" in capsys.readouterr().out
    bad = json.loads(fixture_path("corridor.scene.json").read_text())
    bad["grid"][0] = "." + bad["grid"][0][1:]
    (tmp_path / "bad.json").write_text(json.dumps(bad))
    assert main(["validate-scene", str(tmp_path / "bad.json")]) == 1
    assert "error:" in capsys.readouterr().err


def test_missing_suite_file_exits_1(tmp_path):
    assert main(["run", str(tmp_path / "nope.suite")]) == 1


def test_record_replay_via_cli(tmp_path):
    suite = str(fixture_path("apartment.suite"))
    t = tmp_path / "t"
    assert main(["record", suite, "--transcripts", str(t), "--out", str(tmp_path / "a.jsonl")]) == 0
    assert len(list(t.glob("*.transcript.jsonl"))) == 10
    assert main(["replay", suite, "--transcripts", str(t), "--out", str(tmp_path / "b.jsonl")]) == 0
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_console_script_installed(tmp_path):
    exe = shutil.which("valuenav")
    cmd = [exe] if exe else [sys.executable, "-m", "valuenav.cli"]
    proc = subprocess.run(cmd + ["validate-scene", str(fixture_path("apartment.scene.json"))], capture_output=True, text=True)
    assert proc.returncode == 0 and "apartment" in proc.stdout
