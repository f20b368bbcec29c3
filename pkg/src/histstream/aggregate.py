"""Cross-run summaries: cell statistics, max-normalisation and average ranks."""
from __future__ import annotations

import csv
import math
import os
from collections import defaultdict
from typing import Iterable

import numpy as np
from scipy.stats import rankdata

from histstream.errors import DataError, InputError
from histstream.experiment import RESULT_FIELDS, RunResult

__all__ = ["METRICS", "aggregate", "read_results", "write_results"]

METRICS = ("rmse", "rmse_phi", "sera")
_INT_FIELDS = ("seed", "selected", "replications", "n_test")


def write_results(results: Iterable[RunResult], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, lineterminator="\n")
        writer.writeheader()
        for result in results:
            writer.writerow(result.row())


def read_results(path: str | os.PathLike) -> list[RunResult]:
    """Parse a run CSV written by :func:`write_results`."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty results file")
        missing = set(RESULT_FIELDS) - set(reader.fieldnames)
        if missing:
            raise DataError(f"{path}: missing columns {', '.join(sorted(missing))}")
        results = []
        for line, row in enumerate(reader, start=2):
            try:
                kwargs = {k: row[k] for k in ("dataset", "strategy", "learner", "status", "error")}
                kwargs.update({k: int(row[k]) for k in _INT_FIELDS})
                kwargs.update({k: float(row[k]) if row[k] != "" else math.nan for k in METRICS})
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}, row {line}: {exc}") from None
            results.append(RunResult(**kwargs))
    if not results:
        raise DataError(f"{path}: no result rows")
    return results


def _mean_std(values: list[float]) -> tuple[float | None, float | None]:
    vals = [v for v in values if not math.isnan(v)]
    if not vals:
        return None, None
    mean = float(np.mean(vals))
    std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    return mean, std


def aggregate(results: Iterable[RunResult]) -> dict:
    """Summarise completed runs.

    Returns a JSON-ready dict with

    * ``cells``: mean and sample standard deviation of every metric per
      (dataset, strategy, learner), plus the mean divided by the largest
      mean among the strategies of the same (dataset, learner);
    * ``ranks``: per learner and metric, each strategy's rank averaged over
      datasets (1 = lowest mean error, ties share the mean rank);
    * ``runs``: every input row, unchanged.

    Raises :class:`InputError` if the grid is ragged (a dataset lacks a
    strategy that another dataset has for the same learner) or a run is
    duplicated.
    """
    results = list(results)
    if not results:
        raise InputError("no results to aggregate")

    grouped: dict[tuple[str, str, str], list[RunResult]] = defaultdict(list)
    seen = set()
    for r in results:
        key = (r.dataset, r.strategy, r.learner, r.seed)
        if key in seen:
            raise InputError(f"duplicate run {key}")
        seen.add(key)
        grouped[(r.dataset, r.strategy, r.learner)].append(r)

    cells = {}
    for key, runs in grouped.items():
        ok = [r for r in runs if r.ok]
        cell = {"dataset": key[0], "strategy": key[1], "learner": key[2], "runs": len(runs), "failed": len(runs) - len(ok)}
        for metric in METRICS:
            mean, std = _mean_std([getattr(r, metric) for r in ok])
            cell[metric] = {"mean": mean, "std": std, "normalized": None}
        cells[key] = cell

    # strategies available per (learner, dataset)
    layout: dict[str, dict[str, set[str]]] = defaultdict(lambda: defaultdict(set))
    for dataset, strategy, learner in cells:
        layout[learner][dataset].add(strategy)
    for learner, per_dataset in layout.items():
        sets = {frozenset(s) for s in per_dataset.values()}
        if len(sets) > 1:
            raise InputError(f"learner {learner!r}: datasets were run with different strategy sets")

    for learner, per_dataset in layout.items():
        for dataset, strategies in per_dataset.items():
            for metric in METRICS:
                means = [cells[(dataset, s, learner)][metric]["mean"] for s in strategies]
                finite = [m for m in means if m is not None]
                top = max(finite) if finite else None
                for s in strategies:
                    stat = cells[(dataset, s, learner)][metric]
                    if stat["mean"] is not None and top:
                        stat["normalized"] = stat["mean"] / top

    ranks = []
    for learner, per_dataset in sorted(layout.items()):
        strategies = sorted(next(iter(per_dataset.values())))
        for metric in METRICS:
            totals = defaultdict(float)
            counted = 0
            for dataset in sorted(per_dataset):
                means = [cells[(dataset, s, learner)][metric]["mean"] for s in strategies]
                if any(m is None for m in means):
                    continue
                for s, rank in zip(strategies, rankdata(means, method="average")):
                    totals[s] += float(rank)
                counted += 1
            for s in strategies:
                ranks.append({
                    "learner": learner,
                    "metric": metric,
                    "strategy": s,
                    "avg_rank": totals[s] / counted if counted else None,
                    "datasets": counted,
                })

    return {
        "cells": [cells[k] for k in sorted(cells)],
        "ranks": ranks,
        "runs": [r.row() for r in results],
    }
