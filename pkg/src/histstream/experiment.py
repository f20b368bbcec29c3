"""Prequential warm / train / test harness for every sampling strategy."""
from __future__ import annotations

import logging
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Union

from histstream.data import Dataset, PhaseSplit, SyntheticConfig, generate_synthetic, split_phases
from histstream.density import PidHistogram, RelevanceModel, build_relevance
from histstream.errors import ConfigError, DataError, HistStreamError, NoRelevantInstancesError, RunError
from histstream.learners import Learner, LearnerSpec, make_learner
from histstream.metrics import MetricConfig, PredictionLog, rmse, rmse_phi, sera
from histstream.sampling import (
    STRATEGIES,
    ChebyStats,
    SamplerConfig,
    chebyos_replications,
    chebyus_decide,
    histos_replications,
    histus_decide,
    sampling_probability,
)

logger = logging.getLogger(__name__)

__all__ = ["ExperimentConfig", "PidConfig", "RunResult", "run_grid", "run_prequential"]

DataSource = Union[Dataset, SyntheticConfig]


@dataclass(frozen=True)
class PidConfig:
    initial_bins: int = 10
    split_threshold: float = 0.15
    max_bins: int = 400

    def build(self) -> PidHistogram:
        return PidHistogram(self.initial_bins, self.split_threshold, self.max_bins)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one prequential run needs.

    ``data`` is either a fixed :class:`Dataset` or a :class:`SyntheticConfig`;
    the latter is regenerated with each run's seed.
    """

    data: DataSource
    strategy: str = "baseline"
    split: PhaseSplit = field(default_factory=PhaseSplit)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    pid: PidConfig = field(default_factory=PidConfig)
    relevance_bins: int = 20
    runs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; choose from {', '.join(STRATEGIES)}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")

    @property
    def dataset_name(self) -> str:
        return self.data.name

    def run_seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.runs)]

    def dataset_for(self, seed: int) -> Dataset:
        if isinstance(self.data, SyntheticConfig):
            return generate_synthetic(self.data.with_seed(seed))
        return self.data


def _fmt(value: float) -> str:
    return "" if value is None or (isinstance(value, float) and math.isnan(value)) else repr(float(value))


@dataclass
class RunResult:
    dataset: str
    strategy: str
    learner: str
    seed: int
    rmse: float = math.nan
    rmse_phi: float = math.nan
    sera: float = math.nan
    selected: int = 0
    replications: int = 0
    n_test: int = 0
    status: str = "ok"
    error: str = ""
    log: PredictionLog | None = field(default=None, repr=False, compare=False)
    histogram: PidHistogram | None = field(default=None, repr=False, compare=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def row(self) -> dict:
        """CSV-ready representation (floats in round-trip repr)."""
        return {
            "dataset": self.dataset,
            "strategy": self.strategy,
            "learner": self.learner,
            "seed": self.seed,
            "rmse": _fmt(self.rmse),
            "rmse_phi": _fmt(self.rmse_phi),
            "sera": _fmt(self.sera),
            "selected": self.selected,
            "replications": self.replications,
            "n_test": self.n_test,
            "status": self.status,
            "error": self.error,
        }


RESULT_FIELDS = tuple(RunResult("", "", "", 0).row())


class _Trainer:
    """Applies one strategy's selection / replication rule to a learner."""

    def __init__(self, strategy: str, sampler: SamplerConfig, pid: PidConfig, learner: Learner, rng: random.Random):
        self.strategy = strategy
        self.sampler = sampler
        self.learner = learner
        self.rng = rng
        self.hist = pid.build() if strategy.startswith("hist") else None
        self.stats = ChebyStats() if strategy.startswith("cheby") else None
        self.selected = 0
        self.replications = 0

    def observe(self, y: float) -> None:
        """Density bookkeeping only (warming phase and before each decision)."""
        if self.hist is not None:
            self.hist.update(y)
        elif self.stats is not None:
            self.stats.update(y)

    def _probability(self, y: float) -> float:
        if not self.hist.primed:
            # every value seen so far equals y: its bin holds all the mass
            return math.exp(-self.sampler.beta)
        return sampling_probability(self.hist, y, self.sampler.beta)

    def _open_draw(self) -> float:
        r = self.rng.random()
        while r == 0.0:
            r = self.rng.random()
        return r

    def _train(self, x, y: float, times: int) -> None:
        if times <= 0:
            return
        self.selected += 1
        self.replications += times - 1
        self.learner.train(x, y, times)

    def step(self, x, y: float) -> None:
        """Update the density estimate with ``y`` and train per the strategy."""
        self.observe(y)
        s = self.strategy
        if s == "baseline":
            times = 1
        elif s == "hist-us":
            times = 1 if histus_decide(self._probability(y), self.rng.random()) else 0
        elif s == "hist-os":
            p = self._probability(y)
            times = 1 + histos_replications(p, self.sampler.alpha, self._open_draw(), self.sampler.max_replications)
        elif s == "cheby-us":
            r1, r2 = self.rng.random(), self.rng.random()
            if self.stats.count < 2:
                times = 1
            else:
                times = 1 if chebyus_decide(self.stats, y, self.sampler.second_chance, r1, r2) else 0
        else:
            if self.stats.count < 2:
                times = 1
            else:
                times = chebyos_replications(self.stats, y, self.sampler.max_replications)
        self._train(x, y, times)


def run_prequential(
    config: ExperimentConfig,
    seed: int,
    dataset: Dataset | None = None,
    relevance: RelevanceModel | None = None,
    learner: Learner | None = None,
) -> RunResult:
    """Execute one warm / train / test run and score the test phase.

    The warming slice only feeds the density estimate. In the training slice
    each instance updates the estimate and is then trained on according to
    the strategy. In the test slice each instance is first predicted and
    logged, then handled exactly as in training.

    ``dataset``, ``relevance`` and ``learner`` override what the config would
    build; they exist for callers that share work across runs and for tests.
    """
    if dataset is None:
        dataset = config.dataset_for(seed)
    if len(dataset) == 0:
        raise DataError("dataset is empty")
    warm, train, test = split_phases(dataset, config.split)
    if test.stop - test.start == 0:
        raise DataError("test phase is empty")
    if relevance is None:
        relevance = build_relevance(dataset.y, config.relevance_bins)
    if learner is None:
        learner = make_learner(config.learner)

    rng = random.Random(seed)
    trainer = _Trainer(config.strategy, config.sampler, config.pid, learner, rng)
    X, Y = dataset.X, dataset.y.tolist()
    phis = relevance.phi_array(dataset.y[test]).tolist()
    log = PredictionLog()

    for i in range(warm.start, warm.stop):
        trainer.observe(Y[i])
    try:
        for i in range(train.start, train.stop):
            trainer.step(X[i], Y[i])
        for k, i in enumerate(range(test.start, test.stop)):
            y_hat = learner.predict(X[i])
            if not math.isfinite(y_hat):
                raise RunError("non-finite prediction", index=i)
            log.append(Y[i], y_hat, phis[k])
            trainer.step(X[i], Y[i])
    except RunError as exc:
        if exc.index is None:
            exc = type(exc)(str(exc), index=i)
        raise exc from None

    result = RunResult(
        dataset=dataset.name,
        strategy=config.strategy,
        learner=config.learner.kind,
        seed=seed,
        selected=trainer.selected,
        replications=trainer.replications,
        n_test=len(log),
        log=log,
        histogram=trainer.hist,
    )
    result.rmse = rmse(log)
    result.sera = sera(log, config.metrics.sera_step)
    try:
        result.rmse_phi = rmse_phi(log, config.metrics.thr_phi)
    except NoRelevantInstancesError as exc:
        logger.warning("%s/%s/%s seed %d: %s", dataset.name, config.strategy, config.learner.kind, seed, exc)
        result.error = str(exc)
    return result


def _run_safely(config: ExperimentConfig, seed: int, keep_log: bool) -> RunResult:
    try:
        result = run_prequential(config, seed)
    except HistStreamError as exc:
        logger.error("%s/%s/%s seed %d failed: %s", config.dataset_name, config.strategy, config.learner.kind, seed, exc)
        return RunResult(config.dataset_name, config.strategy, config.learner.kind, seed, status="failed", error=str(exc))
    if not keep_log:
        result.log = None
        result.histogram = None
    return result


def _sort_key(result: RunResult):
    return (result.dataset, STRATEGIES.index(result.strategy), result.learner, result.seed)


def run_grid(
    configs: Iterable[ExperimentConfig],
    jobs: int = 1,
    keep_logs: bool = False,
    progress: Callable[[RunResult], None] | None = None,
) -> list[RunResult]:
    """Run every seed of every config; failures become ``status="failed"`` rows.

    Results come back sorted by (dataset, strategy, learner, seed) whatever
    the completion order.
    """
    tasks = [(cfg, seed) for cfg in configs for seed in cfg.run_seeds()]
    results = []
    if jobs <= 1:
        for cfg, seed in tasks:
            res = _run_safely(cfg, seed, keep_logs)
            results.append(res)
            if progress:
                progress(res)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_safely, cfg, seed, keep_logs) for cfg, seed in tasks]
            for fut in futures:
                res = fut.result()
                results.append(res)
                if progress:
                    progress(res)
    return sorted(results, key=_sort_key)


def with_strategy(config: ExperimentConfig, strategy: str) -> ExperimentConfig:
    return replace(config, strategy=strategy)
