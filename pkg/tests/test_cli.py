"""
Test cli
========
One-shot commands through main(): exit codes, flags and key=value overrides.
"""

import json
import sys
from pathlib import Path

import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

try:
    from space_split.cli import S3Shell, main
    from space_split.src.emit import read_artifact
except ImportError as e:
    print(f"Import Error: {e}")
    print("Ensure you are running this from the project root or have installed the package.")
    sys.exit(1)


def test_show_prints_resolved_config(capsys):
    assert main(["show", "map=solenoid"]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["map_name"] == "solenoid"
    assert shown["observable"] == "sin_cos_x3"
    assert shown["params"] == [0.0]


def test_list():
    assert main(["list"]) == 0


def test_unknown_command():
    assert main(["bogus"]) == 2


def test_invalid_config_exits_2():
    assert main(["run", "n_steps=50"]) == 2


def test_unknown_flag_exits_2():
    assert main(["run", "--verbose"]) == 2


def test_bad_seed_exits_2():
    assert main(["run", "--seed", "abc"]) == 2


def test_missing_config_file_exits_1(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == 1


def test_unwritable_output_exits_1(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    out = blocker / "sub" / "out.csv"
    assert main(["lyapunov", "n_steps=300", "--workers", "1", "--out", str(out)]) == 1


def test_run_writes_file(tmp_path):
    out = tmp_path / "run.csv"
    code = main(
        ["run", "map=solenoid", "n_steps=600", "--seed", "5", "--workers", "1", "--no-timestamp", "--out", str(out)]
    )
    assert code == 0
    config, frame = read_artifact(out)
    assert config["seeds"] == [5]
    assert config["timestamp"] is False
    assert frame["seed"].unique().tolist() == [5]
    assert "# generated" not in out.read_text()


def test_config_file_and_json_format(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text("[experiment]\nmap = baker\nn_steps = 500\n")
    out = tmp_path / "lyap.json"
    assert main(["lyapunov", "--config", str(path), "--format", "json", "--workers", "1", "--out", str(out)]) == 0
    document = json.loads(out.read_text())
    assert document["config"]["mode"] == "lyapunov"
    assert document["columns"][:2] == ["seed", "index"]


def test_converge_seed_expands_to_pair(tmp_path):
    out = tmp_path / "converge.csv"
    assert main(["converge", "--seed", "3", "probe_steps=10", "--out", str(out)]) == 0
    config, frame = read_artifact(out)
    assert config["seeds"] == [3, 4]
    assert len(frame) == 11


@pytest.mark.parametrize("command", ["run help", "sweep --help", "help", "help converge"])
def test_help_does_not_run(command, capsys):
    shell = S3Shell()
    shell.onecmd(command)
    assert shell.last_exit == 0
    assert capsys.readouterr().out
