from __future__ import annotations

import json

import pytest

from cpustat.cli import EXIT_IO, EXIT_USAGE, EXIT_VARIANCE, build_parser, main, read_series_csv
from cpustat.experiments import parse_table


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("CPUSTAT_SEED", raising=False)
    return tmp_path


@pytest.fixture
def table_json(workdir, ci_table):
    path = workdir / "table.json"
    path.write_text(ci_table.to_json())
    return str(path)


def write_csv(path, values, header=True):
    lines = (["value"] if header else []) + [repr(float(v)) for v in values]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestSimulateNull:
    def test_single_level(self, workdir, capsys):
        rc = main(["simulate-null", "--m", "80", "--reps", "200", "--levels", "0.05", "--out", "q"])
        assert rc == 0
        rows = (workdir / "q.csv").read_text().strip().splitlines()
        assert rows[0] == "level,ks,cv" and len(rows) == 2
        doc = json.loads((workdir / "q.json").read_text())
        assert doc["levels"] == [0.05] and doc["meta"]["m"] == 80
        assert "0.050" in capsys.readouterr().out

    def test_rerun_byte_identical(self, workdir):
        args = ["simulate-null", "--m", "60", "--reps", "150", "--seed", "3", "--cache", "c1", "--out", "a"]
        main(args)
        main(args[:-4] + ["--cache", "c2", "--out", "b", "--threads", "3"])
        assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()
        assert (workdir / "a.json").read_bytes() == (workdir / "b.json").read_bytes()

    def test_too_few_reps(self, workdir):
        assert main(["simulate-null", "--reps", "10"]) == EXIT_USAGE

    def test_bad_levels(self, workdir):
        assert main(["simulate-null", "--m", "50", "--reps", "100", "--levels", "1.5"]) == EXIT_USAGE


class TestGenData:
    def test_scenario(self, workdir):
        rc = main(["gen-data", "--scenario", "mean-mean", "--mu2", "1.0", "--mu3", "-0.8", "--seed", "1", "--out", "d.csv"])
        assert rc == 0
        lines = (workdir / "d.csv").read_text().strip().splitlines()
        assert lines[0] == "index,value" and len(lines) == 201
        truth = json.loads((workdir / "d.truth.json").read_text())
        assert truth["changes"] == [75, 150] and truth["n"] == 200

    def test_null_model(self, workdir):
        assert main(["gen-data", "--null", "(0, 0.5, 1)", "--n", "50", "--out", "n.csv"]) == 0
        assert len(read_series_csv(workdir / "n.csv")) == 50

    def test_unknown_scenario(self, workdir):
        assert main(["gen-data", "--scenario", "mean-trend"]) == EXIT_USAGE

    def test_bad_triple(self, workdir):
        assert main(["gen-data", "--null", "(0, 1)"]) == EXIT_USAGE

    def test_env_seed(self, workdir, monkeypatch):
        monkeypatch.setenv("CPUSTAT_SEED", "11")
        main(["gen-data", "--scenario", "mean-mean", "--out", "e.csv"])
        main(["gen-data", "--scenario", "mean-mean", "--seed", "11", "--out", "f.csv"])
        assert (workdir / "e.csv").read_bytes() == (workdir / "f.csv").read_bytes()


class TestDetect:
    def test_constant_series(self, workdir, table_json, capsys):
        path = write_csv(workdir / "c.csv", [5.0] * 10)
        assert main(["detect", path, "--table", table_json, "--out", "r.json"]) == 0
        rep = json.loads((workdir / "r.json").read_text())
        assert rep["t1"] == 0.0 and rep["t2"] == 0.0
        assert not any(d["ks"] or d["cv"] for d in rep["decisions"].values())
        assert rep["argmax_tuple"] == [2, 3]

    def test_too_short(self, workdir, capsys):
        path = write_csv(workdir / "s.csv", [1, 2, 3])
        assert main(["detect", path]) == EXIT_USAGE
        assert "too short" in capsys.readouterr().err

    def test_missing_file(self, workdir):
        assert main(["detect", "nope.csv"]) == EXIT_IO

    def test_nonpositive_variance(self, workdir, table_json, capsys):
        path = write_csv(workdir / "x.csv", range(10))
        assert main(["detect", path, "--table", table_json, "--sigma2", "-1"]) == EXIT_VARIANCE
        assert "positive" in capsys.readouterr().err

    def test_bad_number(self, workdir):
        (workdir / "b.csv").write_text("value\n1\n2\nabc\n4\n5\n")
        assert main(["detect", str(workdir / "b.csv")]) == EXIT_USAGE

    def test_cache_miss_warns_and_builds_ci_table(self, workdir, capsys):
        path = write_csv(workdir / "x.csv", [0.3, -1.0, 2.0, 0.1, 0.5, -0.2, 1.1, 0.0], header=False)
        assert main(["detect", path, "--cache", "cc"]) == 0
        err = capsys.readouterr().err
        assert "warning" in err and "m=500" in err
        assert list((workdir / "cc").glob("null-*.npz"))

    def test_generated_strong_changes(self, workdir, table_json):
        main(["gen-data", "--scenario", "mean-mean", "--mu2", "1.5", "--mu3", "-1.5", "--seed", "7", "--out", "g.csv"])
        assert main(["detect", "g.csv", "--table", table_json, "--out", "r.json"]) == 0
        rep = json.loads((workdir / "r.json").read_text())
        assert rep["decisions"]["0.05"]["ks"]

    @pytest.mark.xfail(strict=True, reason="CV statistic for this seed is 0.135, just under the 0.05 quantile")
    def test_generated_strong_changes_cv(self, workdir, table_json):
        main(["gen-data", "--scenario", "mean-mean", "--mu2", "1.5", "--mu3", "-1.5", "--seed", "7", "--out", "g.csv"])
        main(["detect", "g.csv", "--table", table_json, "--out", "r.json"])
        rep = json.loads((workdir / "r.json").read_text())
        assert rep["decisions"]["0.05"]["cv"]

    def test_csv_table(self, workdir, ci_table):
        (workdir / "t.csv").write_text(ci_table.to_csv())
        path = write_csv(workdir / "x.csv", [0.1 * i for i in range(12)])
        assert main(["detect", path, "--table", "t.csv", "--kernel", "indicator", "--lrv", "newey-west"]) == 0

    def test_unknown_kernel(self, workdir):
        path = write_csv(workdir / "x.csv", range(10))
        assert main(["detect", path, "--kernel", "gauss"]) == EXIT_USAGE


class TestExperiment:
    def test_level_row(self, workdir, table_json, capsys):
        assert main(["experiment", "--row", "(0,0,1)", "--reps", "500", "--table", table_json]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "model,reps,KS,KS_se,CV,CV_se"
        (row,) = parse_table(out)
        assert row["model"] == "(0,0,1)" and row["reps"] == 500
        assert 0 <= row["KS"] <= 1 and row["KS_se"] >= 0

    def test_results_cached(self, workdir, table_json):
        args = ["experiment", "--scenario", "mean-mean", "--mu2", "0.5", "--reps", "20", "--table", table_json]
        main(args + ["--out", "a.csv"])
        assert len(list((workdir / "cache").glob("exp-*.json"))) == 1
        main(args + ["--out", "b.csv"])
        assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()

    def test_markdown(self, workdir, table_json, capsys):
        main(["experiment", "--row", "(0,0,1)", "--reps", "20", "--table", table_json, "--format", "markdown"])
        assert capsys.readouterr().out.startswith("| model")

    def test_needs_row_or_scenario(self, workdir, table_json):
        assert main(["experiment", "--table", table_json]) == EXIT_USAGE

    def test_unknown_scenario(self, workdir, table_json):
        assert main(["experiment", "--scenario", "bogus", "--table", table_json]) == EXIT_USAGE


class TestParser:
    def test_every_flag_has_help(self):
        parser = build_parser()
        sub = next(a for a in parser._actions if a.dest == "command")
        for name, p in sub.choices.items():
            for action in p._actions:
                if action.dest != "help":
                    assert action.help, f"{name} {action.dest}"

    def test_csv_reader_header_and_columns(self, tmp_path):
        (tmp_path / "a.csv").write_text("x\n1.5\n\n2\n")
        assert read_series_csv(tmp_path / "a.csv") == [1.5, 2.0]
        (tmp_path / "b.csv").write_text("index,value\n1,0.25\n2,-3\n")
        assert read_series_csv(tmp_path / "b.csv") == [0.25, -3.0]
