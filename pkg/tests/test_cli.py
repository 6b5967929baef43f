import io
import json

import numpy as np
import pytest

from emperor.cli import run_cli
from emperor.model import format_pointset_csv, sample_gmm, validate_gmm

GMM = {"weights": [0.5, 0.5], "means": [[1.0, 0.0], [-1.0, 0.5]],
       "covariances": [[[1.0, 0.2], [0.2, 1.0]], [[0.5, 0.0], [0.0, 0.5]]]}


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_cli([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def files(tmp_path):
    g = tmp_path / "g.json"
    g.write_text(json.dumps(GMM))
    pts = tmp_path / "p.csv"
    ps = sample_gmm(validate_gmm(GMM["weights"], GMM["means"], GMM["covariances"]), 3000, 1)
    pts.write_text(format_pointset_csv(ps))
    return tmp_path, g, pts


def describe(tmp, pts, name, *extra):
    out = tmp / name
    code, _, err = cli("describe", "--input", pts, "--output", out, "--slices", 12, "--components", 2,
                       "--restarts", 1, "--seed", 3, *extra)
    assert code == 0, err
    return out


def test_describe_deterministic_across_threads(files):
    tmp, _, pts = files
    a = describe(tmp, pts, "a.json")
    b = describe(tmp, pts, "b.json", "--threads", 3)
    assert a.read_bytes() == b.read_bytes()


def test_describe_flat_csv(files):
    tmp, _, pts = files
    describe(tmp, pts, "a.json", "--flat-csv", tmp / "f.csv")
    assert len((tmp / "f.csv").read_text().strip().split(",")) == 12 * 2 * 3


def test_reconstruct_output(files):
    tmp, _, pts = files
    d = describe(tmp, pts, "a.json")
    code, out, err = cli("reconstruct", "--descriptor", d, "--degree", 2)
    assert code == 0, err
    lines = out.strip().split("\n")
    assert lines[0] == "# a1,a2,value"
    rows = [l.split(",") for l in lines[1:]]
    assert [r[:2] for r in rows] == [["2", "0"], ["1", "1"], ["0", "2"]]
    # truth: (1.75, -0.15, 0.875)
    np.testing.assert_allclose([float(r[2]) for r in rows], [1.75, -0.15, 0.875], atol=0.1)


def test_moments(files):
    _, g, _ = files
    code, out, _ = cli("moments", "--gmm", g, "--alpha", "2,0")
    assert code == 0 and float(out) == pytest.approx(1.75)
    code, out, _ = cli("moments", "--gmm", g, "--degree", 1, "--direction", "1,0", "--precision", 6)
    assert code == 0
    assert "psd=true" in out and "carleman" in out
    assert "2,0" not in out and out.split("\n")[1] == "1,0,0"


def test_directions(tmp_path):
    out = tmp_path / "d.json"
    assert cli("directions", "--dim", 3, "--slices", 5, "--seed", 2, "--output", out)[0] == 0
    doc = json.loads(out.read_text())
    assert np.asarray(doc["directions"]).shape == (5, 3)


def test_rates(tmp_path):
    cfg = tmp_path / "r.json"
    cfg.write_text(json.dumps({"gmm": GMM, "degree": 2, "slice_counts": [8, 32, 128], "trials": 5}))
    out, summ = tmp_path / "r.csv", tmp_path / "s.json"
    code, stdout, err = cli("rates", "--config", cfg, "--output", out, "--summary", summ, "--seed", 1)
    assert code == 0, err
    assert stdout.startswith("slope ")
    assert out.read_text().startswith("L,trial,rmse\n")
    assert len(json.loads(summ.read_text())["table"]) == 3


def test_bench(tmp_path):
    cfg = tmp_path / "b.json"
    cfg.write_text(json.dumps({"dataset": {"d": 2, "per_class": 6, "points_per_set": 40},
                               "methods": ["gap", "cov"], "seeds": [0]}))
    out = tmp_path / "b.csv"
    code, stdout, err = cli("bench", "--config", cfg, "--output", out)
    assert code == 0, err
    assert out.read_text().splitlines()[0] == "method,seed,train_acc,test_acc"
    assert "cov" in stdout


def test_usage_errors_exit_1(files):
    tmp, _, pts = files
    code, _, err = cli("describe", "--input", pts, "--output", tmp / "x.json", "--slices", 0)
    assert code == 1 and "--slices" in err and "usage: emperor describe" in err
    code, _, err = cli("describe", "--input", pts)
    assert code == 1 and "--output" in err
    assert cli("nosuch")[0] == 1
    assert cli()[0] == 1


def test_data_errors_exit_2_and_write_nothing(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,x\n")
    out = tmp_path / "o.json"
    code, _, err = cli("describe", "--input", bad, "--output", out)
    assert code == 2 and "bad.csv:2" in err
    assert not out.exists()
    assert sorted(p.name for p in tmp_path.iterdir()) == ["bad.csv"]
    code, _, err = cli("reconstruct", "--descriptor", tmp_path / "missing.json", "--degree", 1)
    assert code == 2
    cfg = tmp_path / "r.json"
    cfg.write_text('{"degree": 2}')
    assert cli("rates", "--config", cfg, "--output", tmp_path / "r.csv")[0] == 2
