import json

import numpy as np
import pytest

from loccprune import serialization as ser
from loccprune.channels import amplitude_damping_channel, dephasing_channel, identity_channel
from loccprune.cli import main


@pytest.fixture
def tree_file(tmp_path):
    path = tmp_path / "tree.json"
    assert main(["gen", "--dims", "2,2", "--rounds", "2", "--outcomes", "3", "--seed", "7",
                 "--inject", "3", "-o", str(path)]) == 0
    return path


def run_json(capsys, argv):
    code = main(argv + ["--json"])
    return code, json.loads(capsys.readouterr().out)


def test_info_dephasing(tmp_path, capsys):
    path = tmp_path / "deph.json"
    ser.save_channel(dephasing_channel((2,)), path)
    code, doc = run_json(capsys, ["info", str(path)])
    assert code == 0
    assert (doc["kappa"], doc["chi"], doc["is_extreme"]) == (2, 2, False)
    assert doc["format"] == ser.BOUNDS_FORMAT


def test_info_amplitude_damping_with_np(tmp_path, capsys):
    path = tmp_path / "amp.json"
    ser.save_channel(amplitude_damping_channel(0.5), path)
    code, doc = run_json(capsys, ["info", str(path), "--np", "8"])
    assert code == 0
    assert doc["is_extreme"]
    assert doc["round_lower_bound_int"] == 2


def test_info_text_output(tmp_path, capsys):
    path = tmp_path / "amp.json"
    ser.save_channel(amplitude_damping_channel(0.5), path)
    assert main(["info", str(path)]) == 0
    assert "extreme            true" in capsys.readouterr().out


def test_info_malformed(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["info", str(path)]) == 2


def test_validate_generated_tree(tree_file, capsys):
    code, doc = run_json(capsys, ["validate", str(tree_file)])
    assert code == 0
    assert doc["passed"]


def test_validate_root_scaled(tree_file, tmp_path, capsys):
    tree = ser.load_tree(tree_file)
    tree.root = tree.root.scaled(0.5)
    bad = tmp_path / "half.json"
    ser.save_tree(tree, bad)
    assert main(["validate", str(bad)]) == 1
    assert "2     FAIL" in capsys.readouterr().out


def test_validate_truncated(tree_file, tmp_path):
    bad = tmp_path / "trunc.json"
    bad.write_text(tree_file.read_text()[:200])
    assert main(["validate", str(bad)]) == 2


def test_prune_and_compare(tree_file, tmp_path, capsys):
    out = tmp_path / "pruned.json"
    report = tmp_path / "report.json"
    assert main(["prune", str(tree_file), "-o", str(out), "--report", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert doc["format"] == ser.PRUNE_REPORT_FORMAT
    assert doc["channel_residual"] <= 1e-8
    pruned = ser.load_tree(out)
    assert all(len(n.children) <= pruned.kappa ** 2 for n in pruned.internal_nodes())
    assert main(["compare", str(tree_file), str(out)]) == 0


def test_prune_already_pruned_is_byte_identical(tree_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["prune", str(tree_file), "-o", str(a)]) == 0
    assert main(["prune", str(a), "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_prune_deterministic_qubits(tmp_path):
    src = tmp_path / "five.json"
    assert main(["gen", "--dims", "2,2", "--rounds", "1", "--outcomes", "5", "--seed", "4",
                 "-o", str(src)]) == 0
    out = tmp_path / "det.json"
    assert main(["prune", str(src), "--mode", "deterministic", "-o", str(out)]) == 0
    tree = ser.load_tree(out)
    assert all(len(n.children) <= 4 for n in tree.internal_nodes())


def test_prune_invalid_input_exits_1(tree_file, tmp_path):
    tree = ser.load_tree(tree_file)
    tree.root = tree.root.scaled(0.5)
    bad = tmp_path / "half.json"
    ser.save_tree(tree, bad)
    assert main(["prune", str(bad), "-o", str(tmp_path / "x.json")]) == 1


def test_gen_is_deterministic(tmp_path):
    argv = ["gen", "--dims", "2,3", "--rounds", "2", "--seed", "12", "--schedule", "seeded-random"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(argv + ["-o", str(a)]) == 0
    assert main(argv + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_from_config(tmp_path):
    cfg = tmp_path / "gen.json"
    from loccprune.harness import GenSpec

    ser.write_json(cfg, ser.gen_spec_to_dict(GenSpec((2, 2), 2, 3, seed=7), splits=3))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["gen", "--config", str(cfg), "-o", str(a)]) == 0
    assert main(["gen", "--dims", "2,2", "--rounds", "2", "--outcomes", "3", "--seed", "7",
                 "--inject", "3", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_needs_seed(tmp_path):
    assert main(["gen", "--dims", "2,2", "--rounds", "1", "-o", str(tmp_path / "x.json")]) == 2


def test_compare_identity_vs_dephasing(tmp_path):
    a, b = tmp_path / "id.json", tmp_path / "deph.json"
    ser.save_channel(identity_channel((2,)), a)
    ser.save_channel(dephasing_channel((2,)), b)
    assert main(["compare", str(a), str(b)]) == 1


def test_unknown_subcommand():
    assert main(["explode"]) == 2


def test_module_entry_point():
    import subprocess
    import sys

    done = subprocess.run([sys.executable, "-m", "loccprune", "--help"], capture_output=True)
    assert done.returncode == 0
    assert b"prune" in done.stdout
