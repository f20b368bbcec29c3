"""Error metrics for imbalanced regression: RMSE, relevance-weighted RMSE, SERA."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from histstream.errors import ConfigError, InputError, NoRelevantInstancesError, StateError

__all__ = ["MetricConfig", "PredictionLog", "rmse", "rmse_phi", "sera", "ser_curve"]


@dataclass(frozen=True)
class MetricConfig:
    thr_phi: float = 0.9
    sera_step: float = 0.001

    def __post_init__(self):
        if not 0.0 <= self.thr_phi <= 1.0:
            raise ConfigError(f"thr_phi must lie in [0, 1], got {self.thr_phi}")
        if not 0.0 < self.sera_step <= 1.0:
            raise ConfigError(f"sera_step must lie in (0, 1], got {self.sera_step}")


class PredictionLog:
    """Append-only record of ``(y_true, y_pred, phi)`` triples in stream order."""

    def __init__(self, y_true=(), y_pred=(), phi=()):
        self._true = [float(v) for v in y_true]
        self._pred = [float(v) for v in y_pred]
        self._phi = [float(v) for v in phi]
        if not len(self._true) == len(self._pred) == len(self._phi):
            raise InputError("y_true, y_pred and phi must have equal length")
        if any(not 0.0 <= p <= 1.0 for p in self._phi):
            raise InputError("relevance values must lie in [0, 1]")

    def append(self, y_true: float, y_pred: float, phi: float) -> None:
        self._true.append(y_true)
        self._pred.append(y_pred)
        self._phi.append(phi)

    def __len__(self) -> int:
        return len(self._true)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PredictionLog):
            return NotImplemented
        return self._true == other._true and self._pred == other._pred and self._phi == other._phi

    @property
    def y_true(self) -> np.ndarray:
        return np.asarray(self._true, dtype=float)

    @property
    def y_pred(self) -> np.ndarray:
        return np.asarray(self._pred, dtype=float)

    @property
    def phi(self) -> np.ndarray:
        return np.asarray(self._phi, dtype=float)

    def rows(self):
        return zip(self._true, self._pred, self._phi)


def _squared_errors(log: PredictionLog) -> np.ndarray:
    if len(log) == 0:
        raise StateError("prediction log is empty")
    return (log.y_pred - log.y_true) ** 2


def rmse(log: PredictionLog) -> float:
    return math.sqrt(float(np.mean(_squared_errors(log))))


def rmse_phi(log: PredictionLog, thr: float = 0.9) -> float:
    """Relevance-weighted RMSE over the entries with ``phi >= thr``.

    Each qualifying squared error is weighted by its relevance and the sum is
    normalised by the total relevance of those entries.

    Raises
    ------
    NoRelevantInstancesError
        If no entry reaches the threshold (or all qualifying weights are 0).
    """
    sq = _squared_errors(log)
    phi = log.phi
    mask = phi >= thr
    weight = float(phi[mask].sum())
    if not mask.any() or weight <= 0.0:
        raise NoRelevantInstancesError(f"no logged instance has relevance >= {thr}")
    return math.sqrt(float((phi[mask] * sq[mask]).sum()) / weight)


def _grid(step: float) -> np.ndarray:
    n = round(1.0 / step)
    if math.isclose(n * step, 1.0, rel_tol=1e-9):
        return np.linspace(0.0, 1.0, n + 1)
    return np.append(np.arange(0.0, 1.0, step), 1.0)


def ser_curve(log: PredictionLog, thresholds) -> np.ndarray:
    """``SER_t``: summed squared error of entries with ``phi >= t`` for each t."""
    sq = _squared_errors(log)
    order = np.argsort(log.phi, kind="stable")
    phi_sorted = log.phi[order]
    # tail[i] = sum of errors for sorted positions i..end
    tail = np.concatenate([np.cumsum(sq[order][::-1])[::-1], [0.0]])
    start = np.searchsorted(phi_sorted, np.asarray(thresholds, dtype=float), side="left")
    return tail[start]


def sera(log: PredictionLog, step: float = 0.001) -> float:
    """Area under ``SER_t / SER_0`` for t in [0, 1], by the trapezoid rule.

    Returns 0 for a log without error.
    """
    if not 0.0 < step <= 1.0:
        raise ConfigError(f"step must lie in (0, 1], got {step}")
    t = _grid(step)
    curve = ser_curve(log, t)
    if curve[0] <= 0.0:
        return 0.0
    return float(np.trapezoid(curve / curve[0], t))
