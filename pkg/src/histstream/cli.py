"""Command-line front end: ``datagen``, ``run`` and ``report``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 every run failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from histstream.aggregate import METRICS, aggregate, read_results, write_results
from histstream.data import PhaseSplit, SyntheticConfig, generate_synthetic, load_csv, region_counts, write_csv
from histstream.density import build_relevance
from histstream.errors import ConfigError, DataError, HistStreamError, InputError
from histstream.experiment import ExperimentConfig, PidConfig, RunResult, run_grid
from histstream.learners import LEARNERS, LearnerSpec
from histstream.metrics import MetricConfig
from histstream.sampling import STRATEGIES, SamplerConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ALL_FAILED = 0, 1, 2, 3

logger = logging.getLogger("histstream")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# name -> (type, default); every entry is settable from --config and its flag
RUN_OPTIONS: dict[str, tuple[type, object]] = {
    "data": (str, "synthetic:100000"),
    "target": (str, "-1"),
    "strategy": (str, "all"),
    "learner": (str, "window-knn"),
    "runs": (int, 10),
    "seed": (int, 0),
    "beta": (float, 4.0),
    "alpha": (float, 1.02),
    "second_chance": (float, 0.15),
    "thr_phi": (float, 0.9),
    "sera_step": (float, 0.001),
    "warm_frac": (float, 0.15),
    "train_frac": (float, 0.20),
    "bins": (int, 10),
    "split_threshold": (float, 0.15),
    "max_bins": (int, 400),
    "relevance_bins": (int, 20),
    "window": (int, 1000),
    "knn": (int, 5),
    "lr": (float, 0.01),
    "jobs": (int, 1),
    "out": (str, "results.csv"),
    "dump": (str, ""),
}


def run_defaults() -> dict:
    return {k: default for k, (_, default) in RUN_OPTIONS.items()}


def read_config_file(path: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in RUN_OPTIONS:
            raise UsageError(f"{path}:{lineno}: expected key=value with a known key, got {raw.strip()!r}")
        kind = RUN_OPTIONS[key][0]
        try:
            values[key] = kind(value.strip())
        except ValueError:
            raise UsageError(f"{path}:{lineno}: {key} expects {kind.__name__}, got {value.strip()!r}") from None
    return values


def _choices(value: str, allowed: Sequence[str], label: str) -> list[str]:
    picked = list(allowed) if value == "all" else [v.strip() for v in value.split(",")]
    unknown = [v for v in picked if v not in allowed]
    if unknown:
        raise UsageError(f"unknown {label} {', '.join(unknown)}; choose from {', '.join(allowed)} or 'all'")
    return picked


def _load_source(data: str, target: str):
    if data.startswith("synthetic"):
        _, _, size = data.partition(":")
        try:
            n = int(size) if size else 100_000
        except ValueError:
            raise UsageError(f"bad synthetic size in --data {data!r}") from None
        if n < 1:
            raise UsageError("synthetic size must be at least 1")
        return SyntheticConfig(n=n)
    column = int(target) if target.lstrip("-").isdigit() else target
    return load_csv(data, target_column=column)


def build_configs(opts: dict) -> list[ExperimentConfig]:
    """Expand resolved options into one config per (strategy, learner)."""
    strategies = _choices(opts["strategy"], STRATEGIES, "strategy")
    learners = _choices(opts["learner"], LEARNERS, "learner")
    if opts["jobs"] < 1:
        raise UsageError("--jobs must be >= 1")
    source = _load_source(opts["data"], opts["target"])
    try:
        common = dict(
            data=source,
            split=PhaseSplit(opts["warm_frac"], opts["train_frac"]),
            sampler=SamplerConfig(opts["beta"], opts["alpha"], opts["second_chance"]),
            metrics=MetricConfig(opts["thr_phi"], opts["sera_step"]),
            pid=PidConfig(opts["bins"], opts["split_threshold"], opts["max_bins"]),
            relevance_bins=opts["relevance_bins"],
            runs=opts["runs"],
            seed=opts["seed"],
        )
        PidConfig.build(common["pid"])
        return [
            ExperimentConfig(
                strategy=s,
                learner=LearnerSpec(kind, learning_rate=opts["lr"], window=opts["window"], neighbors=opts["knn"]),
                **common,
            )
            for s in strategies
            for kind in learners
        ]
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _stem(result: RunResult) -> str:
    return f"{result.dataset}_{result.strategy}_{result.learner}_s{result.seed}"


def dump_series(results: list[RunResult], configs: list[ExperimentConfig], directory: Path) -> None:
    """Write per-run prediction logs, histogram state and relevance curves."""
    directory.mkdir(parents=True, exist_ok=True)
    relevance_done = set()
    for result in results:
        if result.log is not None:
            with open(directory / f"{_stem(result)}_log.csv", "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["t", "y_true", "y_pred", "phi"])
                for t, row in enumerate(result.log.rows()):
                    writer.writerow([t, *map(repr, row)])
        if result.histogram is not None:
            (directory / f"{_stem(result)}_hist.json").write_text(result.histogram.dumps() + "\n", encoding="utf-8")
        key = (result.dataset, result.seed)
        if key in relevance_done:
            continue
        relevance_done.add(key)
        cfg = next(c for c in configs if c.dataset_name == result.dataset)
        model = build_relevance(cfg.dataset_for(result.seed).y, cfg.relevance_bins)
        with open(directory / f"{result.dataset}_s{result.seed}_relevance.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bin_lo", "bin_hi", "count", "phi"])
            for j, count in enumerate(model.counts):
                writer.writerow([repr(model.breaks[j]), repr(model.breaks[j + 1]), count, repr(1.0 - model.relative_density(j))])


def cmd_datagen(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    try:
        cfg = SyntheticConfig(n=args.n, rare_fraction=args.rare_fraction, seed=args.seed)
        counts = region_counts(cfg)
        dataset = generate_synthetic(cfg)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    write_csv(dataset, args.out)
    for region, count in counts:
        print(f"{region.kind:<8} {'rare' if region.rare else 'frequent':<8} y=[{region.y_lo:g}, {region.y_hi:g}]  {count}")
    print(f"wrote {len(dataset)} rows to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    opts = run_defaults()
    if args.config:
        opts.update(read_config_file(args.config))
    opts.update({k: v for k, v in vars(args).items() if k in RUN_OPTIONS and v is not None})
    configs = build_configs(opts)

    def progress(result: RunResult) -> None:
        logger.info("%s %s %s seed %d: %s", result.dataset, result.strategy, result.learner, result.seed, result.status)

    results = run_grid(configs, jobs=opts["jobs"], keep_logs=bool(opts["dump"]), progress=progress)
    write_results(results, opts["out"])
    if opts["dump"]:
        dump_series(results, configs, Path(opts["dump"]))
    failed = sum(not r.ok for r in results)
    print(f"wrote {len(results)} runs to {opts['out']} ({failed} failed)")
    return EXIT_ALL_FAILED if failed == len(results) else EXIT_OK


def cmd_report(args) -> int:
    results = []
    for path in args.results:
        results.extend(read_results(path))
    try:
        summary = aggregate(results)
    except InputError as exc:
        raise DataError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.dump:
        summary["series"] = sorted(p.name for p in Path(args.dump).iterdir() if p.suffix in (".csv", ".json"))
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with open(out / "means.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset", "strategy", "learner", "metric", "mean", "std", "normalized", "runs", "failed"])
        for c in summary["cells"]:
            for metric in METRICS:
                s = c[metric]
                writer.writerow([c["dataset"], c["strategy"], c["learner"], metric,
                                 *("" if s[k] is None else repr(s[k]) for k in ("mean", "std", "normalized")),
                                 c["runs"], c["failed"]])
    with open(out / "ranks.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["learner", "metric", "strategy", "avg_rank", "datasets"])
        for r in summary["ranks"]:
            writer.writerow([r["learner"], r["metric"], r["strategy"], "" if r["avg_rank"] is None else repr(r["avg_rank"]), r["datasets"]])
    print(f"summarised {len(results)} runs into {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="histstream", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log each finished run")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("datagen", help="write the synthetic imbalanced dataset as CSV")
    gen.add_argument("--n", type=int, default=100_000)
    gen.add_argument("--rare-fraction", type=float, default=0.05)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="synthetic.csv")
    gen.set_defaults(func=cmd_datagen)

    run = sub.add_parser("run", help="run the prequential experiment grid")
    run.add_argument("--config", help="flat key=value file; flags override it")
    helps = {
        "data": "CSV path or synthetic[:N] (default synthetic:100000)",
        "target": "target column name or index (default: last column)",
        "strategy": f"comma list of {', '.join(STRATEGIES)} or all (default all)",
        "learner": f"comma list of {', '.join(LEARNERS)} or all (default window-knn)",
        "bins": "initial PiD bins (default 10)",
        "relevance_bins": "equal-width bins of the relevance model (default 20)",
        "window": "window-knn buffer size (default 1000)",
        "knn": "window-knn neighbours (default 5)",
        "lr": "online-linear learning rate (default 0.01)",
        "dump": "directory for per-run logs, histograms and relevance curves",
    }
    for name, (kind, default) in RUN_OPTIONS.items():
        run.add_argument("--" + name.replace("_", "-"), dest=name, type=kind, default=None,
                         help=helps.get(name, f"default {default}"))
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="summarise run CSVs into JSON and plot-ready CSVs")
    rep.add_argument("results", nargs="+", help="CSV files written by 'run'")
    rep.add_argument("--out", default="report", help="output directory (default report)")
    rep.add_argument("--dump", help="series directory from 'run --dump' to index in the summary")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, InputError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except HistStreamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
