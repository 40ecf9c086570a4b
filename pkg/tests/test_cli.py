import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from dispkit.cli import main

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(autouse=True)
def _in_data_dir(monkeypatch):
    # relative paths keep the config echo independent of where the repo lives
    monkeypatch.chdir(DATA)
    monkeypatch.delenv("DISPKIT_SEED", raising=False)


GOLDEN_CASES = {
    "disp_diagonal.txt": ["disp", "--points", "diagonal.txt"],
    "disp_diagonal_torus.jsonl": ["disp", "--points", "diagonal.txt", "--torus", "--format", "jsonl"],
    "bounds_eval.csv": ["bounds", "eval", "--d", "2,3", "--eps", "0.1,0.5", "--k", "0,2"],
    "net_verify.txt": ["net", "verify", "--d", "2", "--eps", "0.25", "--gamma", "1", "--trials", "2000", "--seed", "3"],
    "mc_net.jsonl": ["mc", "net", "--d", "2", "--eps", "0.3", "--n", "200", "--trials", "5", "--seed", "8", "--format", "jsonl"],
}


@pytest.mark.parametrize("name", sorted(GOLDEN_CASES))
def test_golden_outputs(capsys, name):
    code, out, _ = run(capsys, *GOLDEN_CASES[name])
    assert code == 0
    expected = (GOLDEN / name).read_text(encoding="utf-8")
    assert out == expected


def test_disp_values(capsys):
    code, out, _ = run(capsys, "disp", "--points", "midpoint.txt")
    assert code == 0 and "value: 0.5\n" in out
    code, out, _ = run(capsys, "disp", "--points", "empty.txt")
    assert code == 0 and "value: 1\n" in out
    code, out, _ = run(capsys, "disp", "--points", "diagonal.txt", "--format", "jsonl")
    res = json.loads(out.splitlines()[1])
    assert res["value"] == pytest.approx(4 / 9) and res["attained"] is False


def test_output_starts_with_config_echo(capsys):
    _, out, _ = run(capsys, "disp", "--points", "midpoint.txt", "--format", "csv")
    lines = out.splitlines()
    assert lines[0] == "# dispkit output v1"
    assert "# command=disp" in lines and "# k=0" in lines
    _, out, _ = run(capsys, "bounds", "eval", "--d", "2", "--eps", "0.1", "--format", "jsonl")
    first = json.loads(out.splitlines()[0])
    assert first["type"] == "config" and first["format_version"] == 1


def test_malformed_file_exit_2_with_line(capsys):
    code, out, err = run(capsys, "disp", "--points", "bad_row.txt")
    assert code == 2 and "line 3" in err


def test_missing_file_exit_2(capsys):
    code, _, err = run(capsys, "disp", "--points", "nope.txt")
    assert code == 2


def test_oversize_instance_exit_3(capsys, tmp_path):
    import numpy as np

    from dispkit.core import PointSet
    from dispkit.formats import write_points

    path = tmp_path / "big.txt"
    write_points(path, PointSet(4, np.random.default_rng(0).random((60, 4))))
    code, _, err = run(capsys, "disp", "--points", path, "--max-work", "1000")
    assert code == 3 and "estimated work" in err


def test_net_build_and_reuse(capsys, tmp_path):
    path = tmp_path / "net.jsonl"
    code, out, _ = run(capsys, "net", "build", "--d", "2", "--eps", "0.25", "--gamma", "1", "--out", path)
    assert code == 0 and "count: 296" in out
    head = json.loads(path.read_text().splitlines()[0])
    assert head["count"] == 296 == len(path.read_text().splitlines()) - 1
    code, out, _ = run(capsys, "net", "verify", "--net", path, "--trials", "10000", "--seed", "1")
    assert code == 0 and "failures: 0\n" in out
    code, out, _ = run(capsys, "net", "certify", "--net", path, "--points", "empty.txt")
    assert code == 0 and "certified: false" in out and "deficient_count: 296" in out


def test_net_too_large_exit_3(capsys, tmp_path):
    code, _, err = run(capsys, "net", "build", "--d", "5", "--eps", "0.01", "--out", tmp_path / "x")
    assert code == 3 and "boxes" in err
    assert not (tmp_path / "x").exists()


def test_bounds_rows(capsys):
    _, out, _ = run(capsys, "bounds", "eval", "--d", "2", "--eps", "0.1,0.5")
    rows = [line.split(",") for line in out.splitlines() if not line.startswith("#")]
    header = rows[0]
    table = [dict(zip(header, r)) for r in rows[1:]]
    main_row = next(r for r in table if r["formula_id"] == "thm_main" and r["eps"] == "0.10000000000000001")
    assert float(main_row["value"]) == pytest.approx(4606.7, abs=0.05)
    large = next(r for r in table if r["formula_id"] == "mackay_large_eps")
    assert large["eps"] == "0.5" and large["value"] == "1"


def test_bounds_regimes_one_label_per_cell(capsys):
    code, out, _ = run(capsys, "bounds", "regimes", "--d", "2:64", "--log10-eps=-40:-0.3:0.1")
    assert code == 0
    rows = [line for line in out.splitlines() if not line.startswith("#")][1:]
    cells = [tuple(r.split(",")[:2]) for r in rows]
    assert len(cells) == len(set(cells)) == 63 * 398
    assert all(r.split(",")[2] in "1234" for r in rows)


@pytest.mark.parametrize("spec", ["1:2", "a", "0.1:0.5:0", ""])
def test_bad_grid_exit_2(capsys, spec):
    code, _, _ = run(capsys, "bounds", "eval", "--d", "2", "--eps", spec)
    assert code == 2


def test_bad_arguments_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["disp", "--k", "x"])
    assert info.value.code == 2
    code, _, _ = run(capsys, "mc", "net", "--d", "2", "--eps", "1.5", "--trials", "2")
    assert code == 2


SEEDED = [
    ["mc", "net", "--d", "2", "--eps", "0.3", "--n", "150", "--trials", "16", "--seed", "2", "--format", "jsonl"],
    ["mc", "disp", "--d", "2", "--eps", "0.2", "--n", "40", "--k", "1", "--trials", "16", "--seed", "2", "--format", "jsonl"],
    ["mc", "invert", "--d", "1", "--eps", "0.26", "--trials", "20", "--seed", "2"],
    ["net", "verify", "--d", "2", "--eps", "0.2", "--torus", "--trials", "3000", "--seed", "2"],
]


@pytest.mark.parametrize("argv", SEEDED, ids=lambda a: " ".join(a[:2]))
def test_byte_identical_across_threads_and_reruns(capsys, argv):
    outs = {run(capsys, *argv, "--threads", t)[1] for t in ("1", "2", "8")}
    outs.add(run(capsys, *argv)[1])
    assert len(outs) == 1


def test_seed_from_environment(capsys, monkeypatch):
    argv = ["mc", "disp", "--d", "1", "--eps", "0.3", "--n", "5", "--trials", "4", "--format", "jsonl"]
    monkeypatch.setenv("DISPKIT_SEED", "17")
    env_out = run(capsys, *argv)[1]
    monkeypatch.delenv("DISPKIT_SEED")
    assert env_out == run(capsys, *argv, "--seed", "17")[1]
    assert '"seed": 17' in env_out


def test_out_flag_writes_file(capsys, tmp_path):
    path = tmp_path / "o.csv"
    code, out, _ = run(capsys, "bounds", "eval", "--d", "2", "--eps", "0.1", "--out", path)
    assert code == 0 and out == ""
    data = path.read_bytes()
    assert data.startswith(b"# dispkit output v1\n") and b"\r\n" not in data


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "dispkit", "disp", "--points", "midpoint.txt"],
        cwd=DATA, capture_output=True, text=True, env={**os.environ},
    )
    assert proc.returncode == 0 and "value: 0.5" in proc.stdout
