import json
import math

import pytest

from histstream.aggregate import aggregate, read_results, write_results
from histstream.errors import DataError, InputError
from histstream.experiment import RunResult


def run(dataset, strategy, seed, rmse_phi, learner="window-knn", **kw):
    return RunResult(dataset, strategy, learner, seed, rmse=kw.get("rmse", 1.0), rmse_phi=rmse_phi, sera=kw.get("sera", 0.5))


def cell(summary, dataset, strategy, learner="window-knn"):
    return next(c for c in summary["cells"] if (c["dataset"], c["strategy"], c["learner"]) == (dataset, strategy, learner))


def ranks(summary, metric, learner="window-knn"):
    return {r["strategy"]: r["avg_rank"] for r in summary["ranks"] if r["metric"] == metric and r["learner"] == learner}


def test_mean_and_sample_std():
    summary = aggregate([run("d", "baseline", 0, 2.0), run("d", "baseline", 1, 4.0)])
    stat = cell(summary, "d", "baseline")["rmse_phi"]
    assert stat["mean"] == 3.0
    assert stat["std"] == pytest.approx(math.sqrt(2.0))


def test_normalized_by_maximum_per_dataset():
    summary = aggregate([run("d", "baseline", 0, 10.0), run("d", "hist-os", 0, 4.0), run("e", "baseline", 0, 1.0), run("e", "hist-os", 0, 2.0)])
    assert cell(summary, "d", "baseline")["rmse_phi"]["normalized"] == 1.0
    assert cell(summary, "d", "hist-os")["rmse_phi"]["normalized"] == 0.4
    assert cell(summary, "e", "baseline")["rmse_phi"]["normalized"] == 0.5


def test_average_ranks_with_ties():
    rows = [
        run("d", "baseline", 0, 3.0), run("d", "hist-us", 0, 1.0), run("d", "hist-os", 0, 1.0),
        run("e", "baseline", 0, 1.0), run("e", "hist-us", 0, 2.0), run("e", "hist-os", 0, 3.0),
    ]
    r = ranks(aggregate(rows), "rmse_phi")
    # d: hist-us/hist-os tie at 1.5, baseline 3; e: 1, 2, 3
    assert r == {"baseline": 2.0, "hist-us": 1.75, "hist-os": 2.25}


def test_failed_runs_excluded_from_statistics():
    bad = RunResult("d", "baseline", "window-knn", 1, status="failed", error="boom")
    summary = aggregate([run("d", "baseline", 0, 2.0), bad])
    c = cell(summary, "d", "baseline")
    assert c["rmse_phi"]["mean"] == 2.0 and c["failed"] == 1 and c["runs"] == 2
    assert len(summary["runs"]) == 2


def test_nan_metric_skipped():
    summary = aggregate([run("d", "baseline", 0, math.nan), run("d", "baseline", 1, 5.0)])
    assert cell(summary, "d", "baseline")["rmse_phi"]["mean"] == 5.0


def test_duplicate_run_rejected():
    with pytest.raises(InputError):
        aggregate([run("d", "baseline", 0, 1.0), run("d", "baseline", 0, 2.0)])


def test_ragged_grid_rejected():
    with pytest.raises(InputError):
        aggregate([run("d", "baseline", 0, 1.0), run("d", "hist-os", 0, 1.0), run("e", "baseline", 0, 1.0)])


def test_empty_rejected():
    with pytest.raises(InputError):
        aggregate([])


def test_json_serializable():
    summary = aggregate([run("d", "baseline", 0, 1.0), run("d", "hist-os", 0, math.nan)])
    json.dumps(summary, allow_nan=False)


def test_results_round_trip(tmp_path):
    rows = [run("d", "baseline", 0, 0.1 + 0.2), run("d", "hist-us", 3, math.nan),
            RunResult("d", "hist-os", "window-knn", 1, status="failed", error="non-finite prediction (instance 4)")]
    path = tmp_path / "results.csv"
    write_results(rows, path)
    back = read_results(path)
    assert [r.row() for r in back] == [r.row() for r in rows]
    assert back[0].rmse_phi == 0.1 + 0.2


def test_read_rejects_bad_files(tmp_path):
    missing = tmp_path / "cols.csv"
    missing.write_text("dataset,strategy\nd,baseline\n")
    with pytest.raises(DataError):
        read_results(missing)
    garbled = tmp_path / "bad.csv"
    write_results([run("d", "baseline", 0, 1.0)], garbled)
    garbled.write_text(garbled.read_text().replace(",0,", ",zero,", 1))
    with pytest.raises(DataError, match="row 2"):
        read_results(garbled)
    with pytest.raises(DataError):
        read_results(tmp_path / "absent.csv")
