import csv
import json

import pytest

from histstream.cli import EXIT_ALL_FAILED, EXIT_DATA, EXIT_OK, EXIT_USAGE, build_configs, main, run_defaults

SMALL = ["--data", "synthetic:600", "--runs", "2", "--window", "50"]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_default_snapshot():
    d = run_defaults()
    assert (d["beta"], d["alpha"], d["thr_phi"], d["runs"]) == (4.0, 1.02, 0.9, 10)
    assert (d["warm_frac"], d["train_frac"]) == (0.15, 0.20)
    assert (d["second_chance"], d["sera_step"]) == (0.15, 0.001)
    assert (d["bins"], d["split_threshold"], d["max_bins"], d["relevance_bins"]) == (10, 0.15, 400, 20)
    assert (d["window"], d["knn"], d["lr"]) == (1000, 5, 0.01)
    cfg = build_configs(dict(d, data="synthetic:50", strategy="hist-os"))[0]
    assert cfg.sampler.beta == 4.0 and cfg.sampler.alpha == 1.02 and cfg.metrics.thr_phi == 0.9
    assert cfg.runs == 10 and cfg.split.warm_fraction == 0.15 and cfg.split.train_fraction == 0.20


def test_datagen(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["datagen", "--n", "1000", "--seed", "7", "--out", str(out)]) == EXIT_OK
    data = rows(out)
    assert len(data) == 1000 and list(data[0]) == ["x", "y"]
    printed = capsys.readouterr().out
    counts = [int(line.split()[-1]) for line in printed.splitlines() if line.startswith(("tail", "middle", "frequent"))]
    assert counts == [17, 475, 17, 475, 16]
    again = tmp_path / "t.csv"
    main(["datagen", "--n", "1000", "--seed", "7", "--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_datagen_zero_is_usage_error(tmp_path):
    assert main(["datagen", "--n", "0", "--out", str(tmp_path / "x.csv")]) == EXIT_USAGE


def test_run_rows_and_repeatability(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["run", *SMALL, "--strategy", "hist-os", "--seed", "7"]
    assert main([*args, "--out", str(a)]) == EXIT_OK
    assert main([*args, "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert [r["seed"] for r in rows(a)] == ["7", "8"]


def test_run_full_grid(tmp_path):
    out = tmp_path / "grid.csv"
    assert main(["run", *SMALL, "--runs", "1", "--strategy", "all", "--learner", "all", "--out", str(out)]) == EXIT_OK
    got = rows(out)
    assert len(got) == 5 * 3
    assert {(r["strategy"], r["learner"]) for r in got} == {
        (s, l) for s in ("baseline", "hist-us", "hist-os", "cheby-us", "cheby-os")
        for l in ("target-mean", "online-linear", "window-knn")
    }


def test_beta_zero_matches_baseline(tmp_path):
    base, us = tmp_path / "base.csv", tmp_path / "us.csv"
    main(["run", *SMALL, "--strategy", "baseline", "--out", str(base)])
    main(["run", *SMALL, "--strategy", "hist-us", "--beta", "0", "--out", str(us)])
    for r0, r1 in zip(rows(base), rows(us)):
        assert [r0[k] for k in ("rmse", "rmse_phi", "sera")] == [r1[k] for k in ("rmse", "rmse_phi", "sera")]


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# pilot\nruns = 3\nbeta=2.5\nstrategy = hist-us\n")
    out = tmp_path / "r.csv"
    assert main(["run", "--config", str(cfg), "--data", "synthetic:400", "--window", "20", "--runs", "1", "--out", str(out)]) == EXIT_OK
    got = rows(out)
    assert len(got) == 1 and got[0]["strategy"] == "hist-us"


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("gamma = 1\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "r.csv")]) == EXIT_USAGE


@pytest.mark.parametrize("extra", [["--strategy", "smote"], ["--alpha", "1.0"], ["--runs", "0"], ["--beta", "x"], ["--data", "synthetic:0"]])
def test_usage_errors(tmp_path, extra):
    assert main(["run", *SMALL, *extra, "--out", str(tmp_path / "r.csv")]) == EXIT_USAGE


def test_missing_data_file(tmp_path):
    assert main(["run", "--data", str(tmp_path / "none.csv"), "--out", str(tmp_path / "r.csv")]) == EXIT_DATA


def test_csv_data_with_target(tmp_path):
    data = tmp_path / "d.csv"
    main(["datagen", "--n", "500", "--out", str(data)])
    out = tmp_path / "r.csv"
    assert main(["run", "--data", str(data), "--target", "y", "--runs", "2", "--window", "20", "--strategy", "baseline", "--out", str(out)]) == EXIT_OK
    got = rows(out)
    assert [r["dataset"] for r in got] == ["d", "d"]
    assert got[0]["rmse"] == got[1]["rmse"]  # fixed data, baseline has no randomness


def test_all_runs_failed(tmp_path):
    data = tmp_path / "boom.csv"
    data.write_text("x,y\n" + "".join(f"1000000,{i}\n" for i in range(40)))
    out = tmp_path / "r.csv"
    code = main(["run", "--data", str(data), "--learner", "online-linear", "--lr", "10", "--strategy", "baseline", "--runs", "2", "--out", str(out)])
    assert code == EXIT_ALL_FAILED
    assert all(r["status"] == "failed" for r in rows(out))


def test_report_round_trip(tmp_path):
    res, dump, rep = tmp_path / "r.csv", tmp_path / "dump", tmp_path / "rep"
    assert main(["run", *SMALL, "--strategy", "baseline,hist-os", "--out", str(res), "--dump", str(dump)]) == EXIT_OK
    names = {p.name for p in dump.iterdir()}
    assert "synthetic_hist-os_window-knn_s0_log.csv" in names
    assert "synthetic_hist-os_window-knn_s1_hist.json" in names
    assert "synthetic_s0_relevance.csv" in names
    assert main(["report", str(res), "--out", str(rep), "--dump", str(dump)]) == EXIT_OK
    summary = json.loads((rep / "summary.json").read_text())
    assert [{k: str(v) for k, v in r.items()} for r in summary["runs"]] == rows(res)
    assert len(summary["cells"]) == 2
    assert {r["avg_rank"] for r in summary["ranks"] if r["metric"] == "rmse_phi"} <= {1.0, 1.5, 2.0}
    assert len(rows(rep / "means.csv")) == 2 * 3
    assert len(rows(rep / "ranks.csv")) == 2 * 3


def test_report_errors(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    assert main(["report", str(empty), "--out", str(tmp_path / "rep")]) == EXIT_DATA
    assert main(["report"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
