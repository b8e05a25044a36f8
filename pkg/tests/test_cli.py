import json
import math
import subprocess
import sys

import numpy as np
import pytest

from eccar.cli import main
from eccar.io import read_matrix, write_matrix
from oracles import correlated_data

OUTPUT_NAMES = ("U.csv", "V.csv", "B.csv", "lambda.csv", "report.json")


@pytest.fixture
def xy(tmp_path, rng):
    x, y = correlated_data(rng, 80, 6, 5)
    write_matrix(tmp_path / "X.csv", x)
    write_matrix(tmp_path / "Y.csv", y)
    return tmp_path / "X.csv", tmp_path / "Y.csv"


def _report(path):
    return json.loads((path / "report.json").read_text())


def test_simulate_fit_eval_roundtrip(tmp_path):
    sim, mod = tmp_path / "sim", tmp_path / "model"
    assert main(["simulate", "--p", "30", "--s-u", "4", "--signal", "high", "--n", "300",
                 "--seed", "3", "--out", str(sim)]) == 0
    for name in ("X.csv", "Y.csv", "U_star.csv", "V_star.csv", "B_star.csv", "supports.json",
                 "manifest.json"):
        assert (sim / name).exists()
    assert main(["fit", "--x", str(sim / "X.csv"), "--y", str(sim / "Y.csv"), "-r", "2",
                 "--out", str(mod)]) == 0
    rep = _report(mod)
    assert rep["exit_code"] == 0 and rep["schema_version"] == 1
    assert rep["fit"]["converged"]
    assert read_matrix(mod / "U.csv").shape == (30, 2)
    assert main(["eval", "--model", str(mod), "--truth", str(sim), "--x", str(sim / "X.csv"),
                 "--y", str(sim / "Y.csv")]) == 0
    metrics = json.loads((mod / "metrics.json").read_text())["metrics"]
    assert math.isfinite(metrics["stacked_sin_theta"]) and metrics["stacked_sin_theta"] < 1
    assert metrics["normalization_gap_u"] < 1e-6 and metrics["normalization_gap_v"] < 1e-6
    assert set(metrics["support"]) >= {"precision", "recall", "f1", "exact_subset"}


def test_unpenalized_fit_is_normalized(tmp_path, xy):
    out = tmp_path / "m"
    assert main(["fit", "--x", str(xy[0]), "--y", str(xy[1]), "--weight", "0",
                 "--out", str(out)]) == 0
    assert main(["eval", "--model", str(out), "--x", str(xy[0]), "--y", str(xy[1])]) == 0
    metrics = json.loads((out / "metrics.json").read_text())["metrics"]
    assert metrics["normalization_gap_u"] < 1e-6


def test_row_mismatch_exit_2(tmp_path, rng):
    write_matrix(tmp_path / "X.csv", rng.standard_normal((10, 3)))
    write_matrix(tmp_path / "Y.csv", rng.standard_normal((9, 3)))
    code = main(["fit", "--x", str(tmp_path / "X.csv"), "--y", str(tmp_path / "Y.csv"),
                 "--out", str(tmp_path / "o")])
    assert code == 2
    assert _report(tmp_path / "o")["error"]["type"] == "InvalidData"


def test_corrupt_cell_exit_2(tmp_path, xy, capsys):
    lines = xy[0].read_text().splitlines()
    cells = lines[4].split(",")
    cells[2] = "abc"
    lines[4] = ",".join(cells)
    xy[0].write_text("\n".join(lines) + "\n")
    code = main(["fit", "--x", str(xy[0]), "--y", str(xy[1]), "--out", str(tmp_path / "o")])
    assert code == 2
    msg = _report(tmp_path / "o")["error"]["message"]
    assert "line 5" in msg and "column 3" in msg and "'abc'" in msg
    assert "line 5" in capsys.readouterr().err


def test_over_penalized_exit_3(tmp_path, xy):
    code = main(["fit", "--x", str(xy[0]), "--y", str(xy[1]), "--weight", "100",
                 "--out", str(tmp_path / "o")])
    assert code == 3
    assert "DegenerateSolution" in (tmp_path / "o" / "report.json").read_text()


def test_simulate_requires_seed(tmp_path):
    assert main(["simulate", "--p", "10", "--s-u", "3", "--out", str(tmp_path / "s")]) == 2


def test_bad_groups_exit_2(tmp_path, xy):
    code = main(["fit", "--x", str(xy[0]), "--y", str(xy[1]), "--groups", "blocks:0x2",
                 "--out", str(tmp_path / "o")])
    assert code == 2


def test_group_file(tmp_path, xy):
    lines = [";".join(f"{i},{j}" for j in range(5)) for i in range(6)]
    (tmp_path / "g.txt").write_text("# rows\n" + "\n".join(lines) + "\n")
    out = tmp_path / "o"
    assert main(["fit", "--x", str(xy[0]), "--y", str(xy[1]), "--groups",
                 f"file:{tmp_path / 'g.txt'}", "--weight", "0.05", "--out", str(out)]) == 0
    b = read_matrix(out / "B.csv")
    rows = np.any(b != 0, axis=1)
    assert np.array_equal(np.all(b != 0, axis=1), rows)


def test_config_precedence(tmp_path, xy):
    (tmp_path / "c.toml").write_text('rank = 1\n[fit]\nweight = 0.07\n')
    out = tmp_path / "o"
    assert main(["fit", "--x", str(xy[0]), "--y", str(xy[1]), "--config", str(tmp_path / "c.toml"),
                 "--weight", "0.03", "--out", str(out)]) == 0
    rep = _report(out)
    assert rep["manifest"]["config"]["rank"] == 1
    assert rep["manifest"]["config"]["weight"] == 0.03
    assert rep["weight"] == 0.03


def test_fit_byte_identical(tmp_path, xy):
    for d in ("a", "b"):
        assert main(["fit", "--x", str(xy[0]), "--y", str(xy[1]), "--out", str(tmp_path / d)]) == 0
    for name in OUTPUT_NAMES:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert "wall_seconds" in (tmp_path / "a" / "timings.json").read_text()


def test_cv_command(tmp_path, xy):
    out = tmp_path / "cv"
    assert main(["cv", "--x", str(xy[0]), "--y", str(xy[1]), "--k", "3", "--grid-length", "4",
                 "--out", str(out)]) == 0
    text = (out / "cv_path.csv").read_text().splitlines()
    assert len(text) == 5
    assert (out / "U.csv").exists()
    rep = _report(out)
    assert rep["exit_code"] == 0


def test_benchmark_byte_identical(tmp_path):
    spec = {"p_values": [15], "s_values": [3], "signal_values": [0.9], "n_values": [100],
            "replications": 2, "master_seed": 5, "variants": ["eccar-l1", "lowdim"]}
    (tmp_path / "spec.json").write_text(json.dumps(spec))
    for d in ("a", "b"):
        assert main(["benchmark", "--spec", str(tmp_path / "spec.json"),
                     "--out", str(tmp_path / d)]) == 0
    for name in ("results.csv", "summary.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert len((tmp_path / "a" / "results.csv").read_text().splitlines()) == 5


def test_benchmark_requires_master_seed(tmp_path):
    (tmp_path / "spec.json").write_text(json.dumps({"p_values": [15], "s_values": [3],
                                                    "signal_values": [0.9], "n_values": [100]}))
    assert main(["benchmark", "--spec", str(tmp_path / "spec.json"), "--out", str(tmp_path / "o")]) == 2


def test_csv_roundtrip(tmp_path, rng):
    m = rng.standard_normal((7, 4)) * 10.0 ** rng.integers(-8, 8, size=(7, 4))
    write_matrix(tmp_path / "m.csv", m)
    back = read_matrix(tmp_path / "m.csv")
    assert np.max(np.abs(back - m) / np.maximum(np.abs(m), 1e-300)) <= 1e-12
    write_matrix(tmp_path / "h.csv", m, header=[f"c{j}" for j in range(4)])
    np.testing.assert_array_equal(read_matrix(tmp_path / "h.csv"), back)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "eccar", "--version"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and "eccar" in proc.stdout
