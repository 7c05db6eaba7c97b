import hashlib
import json
import subprocess
import sys

import pytest

from meshbal.cli import main
from meshbal.mesh import TetMesh, generate_box_mesh, save_mesh

SCENARIO = """\
# moving peak, small
cells = 2,2,2
indicator = moving_peak
steps = 3
refine_fraction = 0.1
coarsen_fraction = 0.02
p = 4
"""


@pytest.fixture
def box(tmp_path):
    path = tmp_path / "box.mesh"
    save_mesh(generate_box_mesh(8, 1, 1, (8, 1, 1)), path)
    return path


@pytest.fixture
def scenario(tmp_path):
    path = tmp_path / "scenario.txt"
    path.write_text(SCENARIO)
    return path


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def read_csv(path):
    text = path.read_text()
    assert text.endswith("\n")
    lines = text.splitlines()
    return lines[0], [tuple(int(x) for x in line.split(",")) for line in lines[1:]]


@pytest.mark.parametrize("method", ["rtk", "morton", "hilbert"])
def test_partition_writes_csv_and_report(tmp_path, box, method):
    before = digest(box)
    out = tmp_path / "parts.csv"
    assert main(["partition", str(box), "--method", method, "--p", "4", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == "element_id,part"
    assert [e for e, _ in rows] == list(range(48))
    assert {q for _, q in rows} == {0, 1, 2, 3}
    report = json.loads((tmp_path / "parts.csv.report.json").read_text())
    assert report["p"] == 4 and report["part_weights"] == [12, 12, 12, 12]
    assert report["migration_fraction"] == 0.0
    assert digest(box) == before


def test_partition_to_stdout_and_explicit_report(tmp_path, box, capsys):
    rep = tmp_path / "r.json"
    assert main(["partition", str(box), "--p", "2", "--report", str(rep)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("element_id,part\n") and out.endswith("\n")
    assert len(out.splitlines()) == 49
    assert json.loads(rep.read_text())["imbalance"] == 1.0


def test_usage_errors_exit_2(box, scenario, capsys):
    assert main(["partition", str(box), "--p", "0"]) == 2
    assert "--p" in capsys.readouterr().err
    assert main(["partition", str(box)]) == 2
    assert main(["partition", str(box), "--p", "2", "--k", "1"]) == 2
    assert main(["sfc-dump", str(box), "--order", "22"]) == 2
    assert main(["sfc-dump", str(box), "--method", "rtk"]) == 2
    assert main(["bench", str(scenario), "--steps", "0"]) == 2
    assert main(["bench", str(scenario), "--seed", "-4"]) == 2
    assert main([]) == 2
    assert main(["frobnicate"]) == 2


def test_bench_steps_zero_in_file_exits_2(tmp_path, capsys):
    path = tmp_path / "zero.txt"
    path.write_text("steps = 0\n")
    assert main(["bench", str(path)]) == 2
    assert "steps" in capsys.readouterr().err


def test_runtime_errors_exit_1(tmp_path, capsys):
    missing = tmp_path / "nope.mesh"
    assert main(["partition", str(missing), "--p", "2"]) == 1
    assert str(missing) in capsys.readouterr().err
    bad = tmp_path / "bad.mesh"
    bad.write_text("tetmesh v1\n4 1\n0 0 0\n")
    assert main(["sfc-dump", str(bad)]) == 1
    assert "bad.mesh:" in capsys.readouterr().err
    unknown = tmp_path / "s.txt"
    unknown.write_text("colour = red\n")
    assert main(["bench", str(unknown)]) == 1
    assert main(["bench", str(tmp_path / "none.txt")]) == 1


def test_sfc_dump(tmp_path):
    tet = tmp_path / "tet.mesh"
    save_mesh(TetMesh([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)], [(0, 1, 2, 3)]), tet)
    out = tmp_path / "keys.csv"
    assert main(["sfc-dump", str(tet), "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == "element_id,key" and len(rows) == 1


def test_sfc_dump_modes_differ_on_elongated_mesh(tmp_path, box):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sfc-dump", str(box), "--mode", "preserve", "--order", "8", "--out", str(a)]) == 0
    assert main(["sfc-dump", str(box), "--mode", "stretch", "--order", "8", "--out", str(b)]) == 0
    keys_a = [k for _, k in read_csv(a)[1]]
    keys_b = [k for _, k in read_csv(b)[1]]
    assert keys_a != keys_b
    assert all(0 <= k < 2**24 for k in keys_a + keys_b)


def test_bench_records_and_summary(tmp_path, scenario, capsys):
    outs = {}
    for method in ("rtk", "hilbert"):
        outs[method] = tmp_path / f"{method}.jsonl"
        assert main(["bench", str(scenario), "--method", method, "--out", str(outs[method])]) == 0
        summary = capsys.readouterr().out
        assert f"method={method}" in summary and "mean_migration" in summary
    for path in outs.values():
        recs = [json.loads(line) for line in path.read_text().splitlines()]
        assert [r["step"] for r in recs] == [0, 1, 2]
        assert all("partition_time" not in r for r in recs)
    assert outs["rtk"].read_bytes() != outs["hilbert"].read_bytes()


def test_bench_timings_flag(tmp_path, scenario):
    out = tmp_path / "t.jsonl"
    assert main(["bench", str(scenario), "--timings", "--out", str(out)]) == 0
    assert "partition_time" in json.loads(out.read_text().splitlines()[0])


def test_bench_reproducible(tmp_path, scenario):
    outs = []
    for i, workers in enumerate(["1", "1", "3"]):
        path = tmp_path / f"run{i}.jsonl"
        args = ["bench", str(scenario), "--method", "morton", "--seed", "7", "--workers", workers, "--out", str(path)]
        assert main(args) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_module_entry_point_exit_codes(tmp_path, box):
    ok = subprocess.run([sys.executable, "-m", "meshbal", "sfc-dump", str(box), "--order", "4"], capture_output=True, text=True)
    assert ok.returncode == 0 and ok.stdout.startswith("element_id,key\n")
    usage = subprocess.run([sys.executable, "-m", "meshbal", "sfc-dump", str(box), "--order", "22"], capture_output=True, text=True)
    assert usage.returncode == 2 and "usage" in usage.stderr
    missing = subprocess.run([sys.executable, "-m", "meshbal", "partition", "nowhere.mesh", "--p", "2"], capture_output=True, text=True)
    assert missing.returncode == 1 and "nowhere.mesh" in missing.stderr
