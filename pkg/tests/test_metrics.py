import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from histstream.errors import ConfigError, InputError, NoRelevantInstancesError, StateError
from histstream.metrics import MetricConfig, PredictionLog, rmse, rmse_phi, ser_curve, sera


def make_log(errors, phis, base=10.0):
    y = np.full(len(errors), base)
    return PredictionLog(y, y + np.asarray(errors, dtype=float), phis)


def sera_oracle(log, n=100_000):
    """Midpoint Riemann sum of SER_t / SER_0 with SER_t summed entry by entry."""
    sq = [(p - t) ** 2 for t, p, _ in log.rows()]
    phis = [f for _, _, f in log.rows()]
    total = sum(sq)
    if total == 0:
        return 0.0
    # SER_t is a step function of t; integrate it exactly on each midpoint cell
    area = 0.0
    for i in range(n):
        t = (i + 0.5) / n
        area += sum(e for e, f in zip(sq, phis) if f >= t)
    return area / n / total


def random_log(rng, size):
    y = rng.normal(0, 10, size)
    return PredictionLog(y, y + rng.normal(0, 3, size), rng.uniform(0, 1, size))


class TestRmse:
    def test_perfect(self):
        assert rmse(make_log([0, 0, 0], [0.1, 0.5, 1.0])) == 0.0

    def test_single(self):
        assert rmse(make_log([3], [0.2])) == 3.0

    def test_pair(self):
        assert rmse(make_log([3, -4], [0, 0])) == pytest.approx(math.sqrt(12.5), abs=1e-12)

    def test_empty(self):
        with pytest.raises(StateError):
            rmse(PredictionLog())


class TestRmsePhi:
    def test_uniform_weights_equal_rmse(self):
        log = make_log([1, -2, 5, 0.5], [1, 1, 1, 1])
        assert rmse_phi(log, 0.9) == pytest.approx(rmse(log), abs=1e-12)

    def test_threshold_filter(self):
        log = make_log([2, 100], [1.0, 0.5])
        assert rmse_phi(log, 0.9) == pytest.approx(2.0, abs=1e-9)

    def test_weighted_form(self):
        log = make_log([0, 10], [1.0, 0.9])
        assert rmse_phi(log, 0.9) == pytest.approx(math.sqrt(0.9 * 100 / 1.9), abs=1e-9)
        assert rmse_phi(log, 0.9) == pytest.approx(6.882472016, abs=1e-9)

    def test_zero_threshold_all_ones(self):
        rng = np.random.default_rng(0)
        log = PredictionLog(rng.normal(size=50), rng.normal(size=50), np.ones(50))
        assert rmse_phi(log, 0.0) == rmse(log)

    def test_no_relevant(self):
        with pytest.raises(NoRelevantInstancesError):
            rmse_phi(make_log([1, 2], [0.1, 0.2]), 0.9)


class TestSera:
    def test_perfect(self):
        assert sera(make_log([0, 0], [0.3, 1.0])) == 0.0

    def test_all_relevant(self):
        assert sera(make_log([1, 2, 3], [1, 1, 1])) == pytest.approx(1.0, abs=1e-12)

    def test_two_entry_case(self):
        log = make_log([math.sqrt(3), 1.0], [0.0, 0.5])
        assert sera_oracle(log) == pytest.approx(0.125, abs=1e-4)
        assert sera(log, 0.001) == pytest.approx(0.125, abs=0.002)

    def test_matches_fine_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            log = random_log(rng, 30)
            assert sera(log, 0.001) == pytest.approx(sera_oracle(log, 20_000), abs=0.002)
            assert sera(log, 0.001) == pytest.approx(sera(log, 0.0001), abs=0.002)

    def test_non_grid_step(self):
        log = make_log([1.0, 2.0], [0.25, 0.75])
        assert sera(log, 0.3) == pytest.approx(sera_oracle(log, 10_000), abs=0.3)

    def test_bad_step(self):
        with pytest.raises(ConfigError):
            sera(make_log([1], [1]), 0.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 60))
def test_ser_curve_non_increasing_and_sera_bounded(seed, size):
    log = random_log(np.random.default_rng(seed), size)
    t = np.linspace(0, 1, 1001)
    curve = ser_curve(log, t)
    assert (np.diff(curve) <= 1e-9 * curve[0]).all()
    assert 0.0 <= sera(log) <= 1.0


def test_ser_curve_direct():
    log = make_log([1, 2, 3], [0.2, 0.5, 0.9])
    np.testing.assert_allclose(ser_curve(log, [0.0, 0.2, 0.3, 0.5, 0.9, 0.95]), [14, 14, 13, 13, 9, 0])


def test_log_validation():
    with pytest.raises(InputError):
        PredictionLog([1.0], [1.0, 2.0], [0.5])
    with pytest.raises(InputError):
        PredictionLog([1.0], [1.0], [1.5])


def test_metric_config():
    cfg = MetricConfig()
    assert (cfg.thr_phi, cfg.sera_step) == (0.9, 0.001)
    with pytest.raises(ConfigError):
        MetricConfig(thr_phi=1.2)
