import json
import os
import random
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

import pytest

from helpers import random_target
from oracles import tripods_weight_by_loops
from rwk.assembler import (SourceData, SourceError, assemble_detailed, assemble_partition,
                           load_source, source_from_json, thread_count)
from rwk.cli import main
from rwk.graph_kit import admissible_partition_graphs
from rwk.weight_system import TargetData, load_target

FIX = Path(__file__).parent.parent / "fixtures"
TARGET = FIX / "target_n1.json"


@pytest.fixture(autouse=True)
def single_process(monkeypatch):
    monkeypatch.setenv("RWK_THREADS", "1")


def test_b1_four_is_zero():
    t = load_target(TARGET)
    assert assemble_partition(t, load_source(FIX / "source_b1_4.json")) == 0


def test_point_target_gives_torsion():
    t = TargetData(0, [], {})
    assert assemble_partition(t, SourceData(b1=1, torsion_count=7)) == 7


def test_b1_three_by_hand():
    t = load_target(TARGET)
    src = load_source(FIX / "source_b1_3.json")
    g = admissible_partition_graphs(1, 3)[0]
    assert g.aut == 2
    expected = tripods_weight_by_loops(t) * 1 / 2 * src.torsion_count
    assert assemble_partition(t, src) == expected != 0


def test_linearity_in_weights_and_torsion():
    rng = random.Random(3)
    t = random_target(rng, 2, density=0.4)
    keys = [c.key for c in admissible_partition_graphs(2, 0)]
    w1 = {k: Fraction(rng.randint(-5, 5), rng.randint(1, 4)) for k in keys}
    w2 = {k: Fraction(rng.randint(-5, 5), rng.randint(1, 4)) for k in keys}
    z1 = assemble_partition(t, SourceData(0, 1, w1))
    z2 = assemble_partition(t, SourceData(0, 1, w2))
    z12 = assemble_partition(t, SourceData(0, 3, {k: 2 * w1[k] - w2[k] for k in keys}))
    assert z12 == 3 * (2 * z1 - z2)
    # permuting the map does not matter
    rev = dict(reversed(list(w1.items())))
    assert assemble_partition(t, SourceData(0, 1, rev)) == z1


def test_b1_two_ignores_non_admissible_entries():
    t = random_target(random.Random(1), 1)
    key = admissible_partition_graphs(1, 2)[0].key
    base = SourceData(2, 2, {key: Fraction(3, 7)})
    noisy = SourceData(2, 2, {key: Fraction(3, 7), "V 2 / T 0 / E: (0,1) (0,1) (0,1)": 99})
    r = assemble_detailed(t, noisy)
    assert r.total == assemble_partition(t, base)
    assert r.ignored_keys == ["V 2 / T 0 / E: (0,1) (0,1) (0,1)"]


def test_missing_weight_rejected():
    t = load_target(TARGET)
    with pytest.raises(SourceError, match="missing analytic weight"):
        assemble_partition(t, SourceData(0, 1, {}))


def test_float_weights_propagate():
    t = load_target(TARGET)
    key = admissible_partition_graphs(1, 0)[0].key
    z = assemble_partition(t, SourceData(0, 1, {key: 0.5}))
    assert isinstance(z, float)


def test_dimension_pin():
    t = load_target(TARGET)
    with pytest.raises(SourceError):
        assemble_partition(t, SourceData(3, 1, {}, Fraction(1), n=2))


def test_source_validation(tmp_path):
    with pytest.raises(SourceError):
        SourceData(b1=-1)
    with pytest.raises(SourceError):
        SourceData(b1=1, torsion_count=0)
    with pytest.raises(SourceError):
        source_from_json({"torsion_count": 1})
    with pytest.raises(SourceError):
        source_from_json({"b1": 0, "analytic_weights": {"k": "1/0"}})
    p = tmp_path / "s.json"
    p.write_text("[")
    with pytest.raises(SourceError):
        load_source(p)


def test_source_json_roundtrip():
    s = SourceData(2, 3, {"k": Fraction(1, 3)}, Fraction(2))
    assert source_from_json(json.loads(json.dumps(s.to_json()))) == s


def test_thread_count(monkeypatch):
    monkeypatch.setenv("RWK_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("RWK_THREADS", "zero")
    with pytest.raises(SourceError):
        thread_count()


def test_parallel_matches_serial(monkeypatch):
    t = random_target(random.Random(5), 2, density=0.4)
    keys = [c.key for c in admissible_partition_graphs(2, 0)]
    src = SourceData(0, 1, {k: Fraction(i + 1) for i, k in enumerate(keys)})
    serial = assemble_partition(t, src)
    monkeypatch.setenv("RWK_THREADS", "2")
    assert assemble_partition(t, src) == serial


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def test_cli_partition_b1_4(capsys):
    assert main(["partition", "--target", str(TARGET), "--source",
                 str(FIX / "source_b1_4.json")]) == 0
    assert capsys.readouterr().out.strip() == "0"


def test_cli_partition_json(capsys):
    assert main(["--output", "json", "partition", "--target", str(TARGET), "--source",
                 str(FIX / "source_b1_3.json")]) == 0
    data = json.loads(capsys.readouterr().out)
    assert Fraction(data["Z"]) == assemble_partition(load_target(TARGET),
                                                    load_source(FIX / "source_b1_3.json"))


def test_cli_partition_classes(capsys):
    assert main(["--output", "json", "graphs", "partition-classes", "--n", "3", "--b1", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["count"] == 4


def test_cli_enumerate(capsys):
    assert main(["graphs", "enumerate", "--vertices", "2"]) == 0
    assert "# 2 classes" in capsys.readouterr().out


def test_cli_weights(capsys):
    assert main(["weights", "--graph", str(FIX / "theta.txt"), "--target", str(TARGET)]) == 0
    assert "|Aut| = 12" in capsys.readouterr().out


def test_cli_fedosov(capsys):
    assert main(["--output", "json", "fedosov", "--n", "1", "--cutoff", "6", "--curvature",
                 str(FIX / "curvature_n1.txt")]) == 0
    assert json.loads(capsys.readouterr().out)["flat"] is True
    assert main(["fedosov", "--n", "2", "--cutoff", "6", "--curvature",
                 str(FIX / "curvature_n1.txt")]) == 1


def test_cli_verify_and_rg(capsys):
    assert main(["verify", "heat-asymptotics"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 8
    assert main(["rg", "check", "--fixture", str(FIX / "rg_toy.json"), "--hbar", "1"]) == 0


def test_cli_bad_input(tmp_path, capsys):
    assert main(["partition", "--target", str(tmp_path / "missing.json"),
                 "--source", str(FIX / "source_b1_3.json")]) == 1
    bad = tmp_path / "t.json"
    bad.write_text(json.dumps({"n": 1, "omega": [["0", "0"], ["0", "0"]]}))
    assert main(["partition", "--target", str(bad), "--source",
                 str(FIX / "source_b1_3.json")]) == 1
    assert "invertible" in capsys.readouterr().err


def test_cli_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "rwk.cli", "graphs", "partition-classes",
                        "--n", "1", "--b1", "4"], capture_output=True, text=True)
    assert r.returncode == 0 and "# 0 classes" in r.stdout
