import json

import numpy as np
import pytest
from click.testing import CliRunner

from aoiseq import __version__
from aoiseq.cli import main, parse_omegas
from aoiseq.geometry import Trajectory

FAST = ["--states", "2", "--restarts", "1", "--max-iter", "10"]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "d"
    res = CliRunner().invoke(main, ["gen", "--seed", "7", "--per-task", "3", "--duration-min", "120",
                                    "--duration-max", "160", "--out", str(out)])
    assert res.exit_code == 0, res.output
    return out


def run(*args, **kw):
    return CliRunner().invoke(main, [str(a) for a in args], **kw)


class TestGen:
    def test_byte_identical(self, tmp_path):
        for d in ("a", "b"):
            assert run("gen", "--seed", 42, "--per-task", 2, "--out", tmp_path / d).exit_code == 0
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert "run.json" in names and "manifest.json" in names
        for n in names:
            if n != "run.json":
                assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()

    def test_default_count(self, tmp_path):
        assert run("gen", "--out", tmp_path / "d").exit_code == 0
        assert len(json.loads((tmp_path / "d" / "manifest.json").read_text())["entries"]) == 51

    def test_per_task(self, tmp_path):
        run("gen", "--per-task", 5, "--out", tmp_path / "d")
        assert len(list((tmp_path / "d").glob("*.csv"))) == 15


class TestVectorize:
    def test_degenerate_modes_agree(self, dataset, tmp_path):
        a, b = tmp_path / "c.txt", tmp_path / "p.txt"
        assert run("vectorize", "--dataset", dataset, "--mode", "classical", "--out", a).exit_code == 0
        res = run("vectorize", "--dataset", dataset, "--mode", "possibilistic", "--omega", 0, "-P", 1, "--out", b)
        assert res.exit_code == 0
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "c.txt.run.json").exists()

    def test_empty_sequence_warning(self, dataset, tmp_path):
        traj = tmp_path / "off.csv"
        Trajectory(np.full((5, 2), 1000.0), id="off").save(traj)
        out = tmp_path / "s.txt"
        res = run("vectorize", traj, "--layout", dataset / "layout.json", "--out", out)
        assert res.exit_code == 0
        assert "empty sequence" in res.stderr
        assert out.read_text() == "\n"

    def test_missing_layout(self, dataset, tmp_path):
        out = tmp_path / "s.txt"
        res = run("vectorize", "--dataset", dataset, "--layout", tmp_path / "nope.json", "--out", out)
        assert res.exit_code == 2
        assert list(tmp_path.iterdir()) == []

    def test_bad_trajectory_file(self, dataset, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,x,y\n0,1,1\n5,1,1\n")
        res = run("vectorize", bad, "--layout", dataset / "layout.json", "--out", tmp_path / "s.txt")
        assert res.exit_code == 2
        assert "bad.csv:3" in res.stderr
        assert not (tmp_path / "s.txt").exists()


class TestTrainClassify:
    @pytest.mark.parametrize("model", ["hmm", "crf"])
    def test_round_trip(self, dataset, tmp_path, model):
        seqs, bundle, preds = tmp_path / "s.txt", tmp_path / "m.json", tmp_path / "p.csv"
        run("vectorize", "--dataset", dataset, "--out", seqs)
        assert run("train", "--sequences", seqs, "--model", model, *FAST, "--out", bundle).exit_code == 0
        assert run("classify", "--model", bundle, "--sequences", seqs, "--out", preds).exit_code == 0
        rows = preds.read_text().splitlines()
        assert rows[0] == "index,true,predicted" and len(rows) == 10

    def test_empty_sequence_recorded(self, dataset, tmp_path):
        seqs, bundle = tmp_path / "s.txt", tmp_path / "m.json"
        run("vectorize", "--dataset", dataset, "--out", seqs)
        run("train", "--sequences", seqs, *FAST, "--out", bundle)
        test = tmp_path / "t.txt"
        test.write_text("INT\tA B\nINT\t\n")
        res = run("classify", "--model", bundle, "--sequences", test, "--out", tmp_path / "p.csv")
        assert res.exit_code == 1
        assert (tmp_path / "p.csv").read_text().splitlines()[2] == "2,INT,<failed>"


class TestEvaluation:
    def test_loocv_report(self, dataset, tmp_path):
        res = run("loocv", "--dataset", dataset, "--model", "hmm", "--mode", "classical", *FAST, "--out", tmp_path)
        assert res.exit_code == 0
        lines = (tmp_path / "report.csv").read_text().splitlines()
        assert lines[0] == "class,samples,errors,accuracy_pct"
        assert [line.split(",")[0] for line in lines[1:]] == ["DEG1", "DEG2", "INT", "TOTAL"]
        assert (tmp_path / "confusion.csv").read_text().startswith("true,predicted,count\n")

    def test_sweep_rows(self, dataset, tmp_path):
        res = run("sweep", "--dataset", dataset, "--model", "crf", "--omegas", "0:12:1", "--max-iter", 5,
                  "--out", tmp_path)
        assert res.exit_code == 0, res.stderr
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0] == "omega,accuracy_pct" and len(lines) == 14

    def test_rerun_identical(self, dataset, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        run("sweep", "--dataset", dataset, "--omegas", "0,2", *FAST, "--out", first)
        res = run("rerun", first / "run.json", "--out", second, "--jobs", 2)
        assert res.exit_code == 0, res.stderr
        assert (first / "sweep.csv").read_bytes() == (second / "sweep.csv").read_bytes()

    def test_config_precedence(self, dataset, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 3, "loocv": {"states": 2, "restarts": 1, "max_iter": 10}}))
        run("--config", cfg, "loocv", "--dataset", dataset, "--restarts", 2, "--out", tmp_path / "o")
        params = json.loads((tmp_path / "o" / "run.json").read_text())["params"]
        assert (params["seed"], params["states"], params["restarts"], params["max_iter"]) == (3, 2, 2, 10)

    def test_unknown_flag(self, dataset, tmp_path):
        assert run("loocv", "--dataset", dataset, "--bogus", "--out", tmp_path).exit_code == 2


def test_version():
    res = run("--version")
    assert __version__ in res.output and "hmm-model 1" in res.output


@pytest.mark.parametrize(
    "text,expected",
    [("0:12:1", list(range(13))), ("0:1:0.25", [0, 0.25, 0.5, 0.75, 1]), ("3", [3]), ("0,1.5,4", [0, 1.5, 4])],
)
def test_parse_omegas(text, expected):
    assert parse_omegas(text) == expected


@pytest.mark.parametrize("text", ["1:0:1", "0:5:0", "-1", "a,b"])
def test_parse_omegas_rejects(text):
    with pytest.raises(Exception):
        parse_omegas(text)
