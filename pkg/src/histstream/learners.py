"""Incremental regressors with a shared ``predict`` / ``train`` interface.

Training on the same instance twice applies the update twice; oversampling
strategies rely on that.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from histstream.errors import ConfigError, DivergenceError, InputError

__all__ = ["LEARNERS", "Learner", "LearnerSpec", "OnlineLinear", "TargetMean", "WindowKNN", "make_learner"]

LEARNERS = ("target-mean", "online-linear", "window-knn")


@dataclass(frozen=True)
class LearnerSpec:
    kind: str = "window-knn"
    learning_rate: float = 0.01
    window: int = 1000
    neighbors: int = 5

    def __post_init__(self):
        if self.kind not in LEARNERS:
            raise ConfigError(f"unknown learner {self.kind!r}; choose from {', '.join(LEARNERS)}")
        if not self.learning_rate > 0:
            raise ConfigError("learning rate must be > 0")
        if not self.window >= self.neighbors >= 1:
            raise ConfigError("need window >= neighbors >= 1")


class Learner:
    """Base class: tracks the feature dimensionality seen in training."""

    name = "learner"

    def __init__(self):
        self.n_features: int | None = None

    def _check(self, x: np.ndarray) -> None:
        if self.n_features is not None and x.shape[0] != self.n_features:
            raise InputError(f"expected {self.n_features} features, got {x.shape[0]}")

    def predict(self, x) -> float:
        raise NotImplementedError

    def train(self, x, y: float, times: int = 1) -> None:
        """Apply the single-instance update ``times`` times in a row."""
        for _ in range(times):
            self._update(np.asarray(x, dtype=float).reshape(-1), float(y))

    def _update(self, x: np.ndarray, y: float) -> None:
        raise NotImplementedError


class TargetMean(Learner):
    """Predicts the running mean of every target trained so far."""

    name = "target-mean"

    def __init__(self):
        super().__init__()
        self.count = 0
        self.mean = 0.0

    def predict(self, x) -> float:
        self._check(np.asarray(x, dtype=float).reshape(-1))
        return self.mean

    def _update(self, x: np.ndarray, y: float) -> None:
        self._check(x)
        self.n_features = x.shape[0]
        self.count += 1
        self.mean += (y - self.mean) / self.count


class OnlineLinear(Learner):
    """Linear model fitted by one SGD step on squared error per training call."""

    name = "online-linear"

    def __init__(self, learning_rate: float = 0.01):
        super().__init__()
        self.learning_rate = learning_rate
        self.weights: np.ndarray | None = None
        self.bias = 0.0

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        self._check(x)
        if self.weights is None:
            return self.bias
        with np.errstate(over="ignore", invalid="ignore"):
            return float(self.weights @ x) + self.bias

    def _update(self, x: np.ndarray, y: float) -> None:
        self._check(x)
        if self.weights is None:
            self.n_features = x.shape[0]
            self.weights = np.zeros(x.shape[0])
        residual = y - self.predict(x)
        step = self.learning_rate * residual
        with np.errstate(over="ignore", invalid="ignore"):
            self.weights = self.weights + step * x
        self.bias += step
        if not (math.isfinite(self.bias) and np.isfinite(self.weights).all()):
            raise DivergenceError("online-linear weights diverged; lower the learning rate")


class WindowKNN(Learner):
    """k-nearest-neighbour mean over the last ``window`` trained instances.

    The window is a FIFO ring buffer of instances. Training one instance
    ``times`` times stores it once with multiplicity ``times``; predictions
    are the same as if the copies had been buffered individually, but copies
    do not push other instances out of the window. Distance ties are broken
    by insertion order (earliest first).
    """

    name = "window-knn"

    def __init__(self, window: int = 1000, neighbors: int = 5):
        super().__init__()
        self.window = window
        self.neighbors = neighbors
        self._X: np.ndarray | None = None
        self._y = np.zeros(window)
        self._w = np.zeros(window)
        self._size = 0
        self._head = 0  # slot the next instance is written to

    def __len__(self) -> int:
        return self._size

    def buffer(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Buffered features, targets and multiplicities, oldest first."""
        if self._X is None:
            return np.zeros((0, 0)), np.zeros(0), np.zeros(0)
        order = self._order()
        return self._X[order].copy(), self._y[order].copy(), self._w[order].copy()

    def _order(self) -> np.ndarray:
        if self._size < self.window:
            return np.arange(self._size)
        return (self._head + np.arange(self.window)) % self.window

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        self._check(x)
        if self._size == 0:
            return 0.0
        order = self._order()
        w = self._w[order]
        y = self._y[order]
        k = self.neighbors
        if w.sum() <= k:
            return float((w * y).sum() / w.sum())
        diff = self._X[order] - x
        dist = np.einsum("ij,ij->i", diff, diff)
        # the k nearest entries always carry at least k units of weight
        m = min(k, dist.shape[0])
        kth = dist[np.argpartition(dist, m - 1)[:m]].max()
        cand = np.flatnonzero(dist <= kth)
        cand = cand[np.argsort(dist[cand], kind="stable")[:m]]
        cw = w[cand]
        before = np.cumsum(cw) - cw
        take = np.clip(k - before, 0.0, cw)
        return float((take * y[cand]).sum() / k)

    def train(self, x, y: float, times: int = 1) -> None:
        if times < 1:
            return
        x = np.asarray(x, dtype=float).reshape(-1)
        self._check(x)
        if self._X is None:
            self.n_features = x.shape[0]
            self._X = np.zeros((self.window, x.shape[0]))
        self._X[self._head] = x
        self._y[self._head] = y
        self._w[self._head] = times
        self._head = (self._head + 1) % self.window
        self._size = min(self._size + 1, self.window)


def make_learner(spec: LearnerSpec) -> Learner:
    if spec.kind == "target-mean":
        return TargetMean()
    if spec.kind == "online-linear":
        return OnlineLinear(spec.learning_rate)
    return WindowKNN(spec.window, spec.neighbors)
